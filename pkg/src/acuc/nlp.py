"""Primal-dual interior-point method for smooth nonlinear programs.

Solves ``min f(x)`` subject to ``g(x) = 0`` and ``h(x) <= 0`` with Newton
steps on the perturbed KKT system, following the classic step-length and
centering rules of power-system interior-point codes (fraction-to-boundary
``xi``, centering ``sigma``).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["IpmOptions", "IpmResult", "solve_nlp"]

log = logging.getLogger(__name__)


@dataclass
class IpmOptions:
    feas_tol: float = 1e-9
    grad_tol: float = 1e-6
    comp_tol: float = 1e-6
    cost_tol: float = 1e-6
    max_iter: int = 150
    xi: float = 0.99995
    sigma: float = 0.1
    z0: float = 1.0


@dataclass
class IpmResult:
    x: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    f: float
    converged: bool
    iterations: int
    message: str
    feas: float


def solve_nlp(
    fun: Callable,
    constraints: Callable,
    hessian: Callable,
    x0: np.ndarray,
    options: IpmOptions | None = None,
) -> IpmResult:
    """``fun(x) -> (f, df)``; ``constraints(x) -> (g, h, dg, dh)`` with sparse
    Jacobians of shape ``(m, n)``; ``hessian(x, lam, mu)`` returns the sparse
    Hessian of the Lagrangian ``f + lam'g + mu'h``."""
    opt = options or IpmOptions()
    x = np.array(x0, dtype=float)
    n = x.size
    f, df = fun(x)
    g, h, dg, dh = constraints(x)
    neq, niq = g.size, h.size

    gamma = 1.0
    lam = np.zeros(neq)
    z = np.full(niq, opt.z0)
    k = h < -opt.z0
    z[k] = -h[k]
    mu = np.full(niq, opt.z0)
    k = gamma / z > opt.z0
    mu[k] = gamma / z[k]

    f_prev = f
    message = "iteration limit"
    converged = False
    it = 0
    feas = math.inf
    for it in range(1, opt.max_iter + 1):
        lx = df + dg.T @ lam + dh.T @ mu
        feas = max(np.abs(g).max(initial=0.0), h.max(initial=0.0))
        scale_x = 1.0 + max(np.abs(x).max(initial=0.0), np.abs(z).max(initial=0.0))
        scale_m = 1.0 + max(np.abs(lam).max(initial=0.0), np.abs(mu).max(initial=0.0))
        gradcond = np.abs(lx).max(initial=0.0) / scale_m
        compcond = float(z @ mu) / scale_x
        costcond = abs(f - f_prev) / (1.0 + abs(f_prev))
        if (feas < opt.feas_tol and gradcond < opt.grad_tol and compcond < opt.comp_tol
                and (it > 1 and costcond < opt.cost_tol)):
            converged = True
            message = "converged"
            it -= 1
            break

        lxx = hessian(x, lam, mu)
        zinv = 1.0 / z
        dh_zinv = dh.T @ sp.diags(zinv)
        M = lxx + dh_zinv @ sp.diags(mu) @ dh
        N = lx + dh_zinv @ (mu * h + gamma)
        kkt = sp.bmat([[M, dg.T], [dg, None]], format="csc")
        rhs = -np.concatenate([N, g])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", spla.MatrixRankWarning)
            sol = spla.spsolve(kkt, rhs)
        if not np.all(np.isfinite(sol)):
            message = "singular Newton system"
            break
        dx, dlam = sol[:n], sol[n:]
        dz = -h - z - dh @ dx
        dmu = -mu + zinv * (gamma - mu * dz)

        alpha_p = 1.0
        k = dz < 0
        if k.any():
            alpha_p = min(opt.xi * float(np.min(-z[k] / dz[k])), 1.0)
        alpha_d = 1.0
        k = dmu < 0
        if k.any():
            alpha_d = min(opt.xi * float(np.min(-mu[k] / dmu[k])), 1.0)

        x = x + alpha_p * dx
        z = z + alpha_p * dz
        lam = lam + alpha_d * dlam
        mu = mu + alpha_d * dmu
        if niq:
            gamma = opt.sigma * float(z @ mu) / niq

        f_prev = f
        f, df = fun(x)
        g, h, dg, dh = constraints(x)
        if not (np.all(np.isfinite(x)) and math.isfinite(f)):
            message = "numerically failed"
            break
    feas = max(np.abs(g).max(initial=0.0), h.max(initial=0.0))
    log.debug("interior point: %s after %d iterations (feas %.2e)", message, it, feas)
    return IpmResult(x=x, lam=lam, mu=mu, f=f, converged=converged, iterations=it,
                     message=message, feas=feas)
