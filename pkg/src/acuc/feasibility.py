"""AC-feasible dispatch for a fixed commitment schedule.

:func:`recover_dispatch` solves the multiperiod AC OPF locally with the
interior-point method of :mod:`acuc.nlp`, written in rectangular voltage
coordinates ``V = e + jf`` so that injections and flows are quadratic.
Angle-difference limits of the network are enforced as well, which keeps
every recovered point inside the region where the relaxation cuts are
valid.

:func:`evaluate_residuals` is the independent checker. It loops over lines
and buses in polar coordinates, forms ``c``/``s`` from their definitions and
evaluates every row of the multiperiod OPF. It shares no code with the
solver path.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .conic_solver import ConicSolution
from .instance_gen import UcInstance
from .nlp import IpmOptions, solve_nlp
from .schedule import CommitmentSchedule, ScheduleError

__all__ = [
    "AcDispatch",
    "RecoveryOutcome",
    "recover_dispatch",
    "evaluate_residuals",
    "max_residual",
    "schedule_cost",
    "write_dispatch",
    "FEAS_TOL",
]

log = logging.getLogger(__name__)

FEAS_TOL = 1e-6
FEASIBLE = "feasible"
LOCAL_INFEASIBLE = "local_infeasible"


@dataclass
class AcDispatch:
    """Arrays are ``(n_bus, T)``, ``(n_gen, T)`` or ``(n_branch, T)``."""

    vm: np.ndarray
    va: np.ndarray
    pg: np.ndarray
    qg: np.ndarray
    p_fwd: np.ndarray
    p_bwd: np.ndarray
    q_fwd: np.ndarray
    q_bwd: np.ndarray
    cost: float
    max_residual: float


@dataclass
class RecoveryOutcome:
    status: str
    dispatch: AcDispatch | None = None
    max_residual: float = math.inf
    iterations: int = 0
    start: str = ""
    message: str = ""
    attempts: list[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE


# --------------------------------------------------------------------------
# independent checker


def evaluate_residuals(instance: UcInstance, schedule: CommitmentSchedule, vm, va, pg, qg) -> dict[str, float]:
    """Largest violation of each constraint family at a polar operating point.

    Keys follow the constraint labels of :mod:`acuc.formulation`; ``"vm"``
    and ``"angle"`` hold voltage-magnitude and angle-difference limits.
    Generation rows use the schedule: uncommitted units must produce zero.
    """
    net = instance.network
    T = instance.horizon
    vm, va = np.asarray(vm, float), np.asarray(va, float)
    pg, qg = np.asarray(pg, float), np.asarray(qg, float)
    if vm.shape != (net.n_bus, T) or va.shape != vm.shape:
        raise ValueError("voltage arrays must have shape (n_bus, T)")
    if pg.shape != (net.n_gen, T) or qg.shape != pg.shape:
        raise ValueError("generation arrays must have shape (n_gen, T)")
    res = {k: 0.0 for k in ("2b", "2c", "2d", "2e", "2f", "2g", "2h", "2i", "2j",
                            "2k", "2l", "2m", "2n", "vm", "angle")}

    def bump(key, val):
        if val > res[key]:
            res[key] = val

    for t in range(T):
        pbal = [-instance.pd[k, t] for k in range(net.n_bus)]
        qbal = [-instance.qd[k, t] for k in range(net.n_bus)]
        for g, gen in enumerate(net.generators):
            k = net.bus_index[gen.bus]
            pbal[k] += pg[g, t]
            qbal[k] += qg[g, t]
        for k, bus in enumerate(net.buses):
            cii = vm[k, t] ** 2
            pbal[k] -= bus.gs_shunt * cii
            qbal[k] += bus.bs_shunt * cii
            bump("vm", max(bus.vmin - vm[k, t], vm[k, t] - bus.vmax, 0.0))
        for br in net.branches:
            i, j = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
            dth = va[i, t] - va[j, t]
            mag = vm[i, t] * vm[j, t]
            c = mag * math.cos(dth)
            s = -mag * math.sin(dth)
            cii, cjj = vm[i, t] ** 2, vm[j, t] ** 2
            pf = br.Gff * cii + br.Gft * c - br.Bft * s
            pt = br.Gtt * cjj + br.Gtf * c + br.Btf * s
            qf = -br.Bff * cii - br.Bft * c - br.Gft * s
            qt = -br.Btt * cjj - br.Btf * c + br.Gtf * s
            pbal[i] -= pf
            qbal[i] -= qf
            pbal[j] -= pt
            qbal[j] -= qt
            if math.isfinite(br.s_max):
                bump("2k", max(0.0, math.hypot(pf, qf) - br.s_max))
                bump("2l", max(0.0, math.hypot(pt, qt) - br.s_max))
            bump("2m", abs(c * c + s * s - cii * cjj))
            back = va[j, t] - va[i, t]
            bump("2n", abs(s * math.cos(back) - c * math.sin(back)))
            # wrap to (-pi, pi] before comparing with the limits
            wrapped = math.atan2(math.sin(dth), math.cos(dth))
            bump("angle", max(br.angle_min - wrapped, wrapped - br.angle_max, 0.0))
        for k in range(net.n_bus):
            bump("2b", abs(pbal[k]))
            bump("2c", abs(qbal[k]))
        for g, gen in enumerate(net.generators):
            on = schedule.u[g, t]
            bump("2e", max(gen.pmin * on - pg[g, t], pg[g, t] - gen.pmax * on, 0.0))
            bump("2d", max(gen.qmin * on - qg[g, t], qg[g, t] - gen.qmax * on, 0.0))
    if T >= 2:
        for g, par in enumerate(instance.gen_params):
            for t in range(T):
                step = pg[g, t] - pg[g, t - 1]
                bump("2f", max(step - par.RU, -step - par.RD, 0.0))
    return res


def max_residual(residuals: dict[str, float]) -> float:
    return max(residuals.values(), default=0.0)


def schedule_cost(instance: UcInstance, schedule: CommitmentSchedule, pg) -> float:
    """Commitment cost plus generation cost of a dispatch."""
    total = 0.0
    for g, gen in enumerate(instance.network.generators):
        par = instance.gen_params[g]
        for t in range(instance.horizon):
            u = schedule.u[g, t]
            p = pg[g, t]
            total += u * (gen.cost_constant + par.fixed_cost)
            total += schedule.v[g, t] * par.startup_cost + schedule.w[g, t] * par.shutdown_cost
            total += gen.cost_quadratic * p * p + gen.cost_linear * p
    return total


# --------------------------------------------------------------------------
# AC problem in rectangular coordinates


def _hess_form(H: sp.spmatrix, imag: bool) -> sp.csr_matrix:
    """Hessian of Re (or Im) of ``V^T H conj(V)`` in ``x = [e; f]``."""
    Hr = sp.csr_matrix(H.real)
    Hi = sp.csr_matrix(H.imag)
    if imag:
        K = sp.bmat([[Hi, -Hr], [Hr, Hi]])
    else:
        K = sp.bmat([[Hr, Hi], [-Hi, Hr]])
    return (K + K.T).tocsr()


class _AcProblem:
    def __init__(self, instance: UcInstance, schedule: CommitmentSchedule):
        net = instance.network
        self.instance, self.schedule = instance, schedule
        nb, nl, T = net.n_bus, net.n_branch, instance.horizon
        self.nb, self.nl, self.T = nb, nl, T
        NB, NL = nb * T, nl * T
        self.NB, self.NL = NB, NL

        f_idx = np.array([net.bus_index[b.from_bus] for b in net.branches], dtype=int)
        t_idx = np.array([net.bus_index[b.to_bus] for b in net.branches], dtype=int)
        yff = np.array([b.Gff + 1j * b.Bff for b in net.branches])
        yft = np.array([b.Gft + 1j * b.Bft for b in net.branches])
        ytf = np.array([b.Gtf + 1j * b.Btf for b in net.branches])
        ytt = np.array([b.Gtt + 1j * b.Btt for b in net.branches])
        rows = np.arange(nl)
        Cf = sp.csr_matrix((np.ones(nl), (rows, f_idx)), shape=(nl, nb))
        Ct = sp.csr_matrix((np.ones(nl), (rows, t_idx)), shape=(nl, nb))
        Yf = sp.csr_matrix((np.r_[yff, yft], (np.r_[rows, rows], np.r_[f_idx, t_idx])), shape=(nl, nb))
        Yt = sp.csr_matrix((np.r_[ytf, ytt], (np.r_[rows, rows], np.r_[f_idx, t_idx])), shape=(nl, nb))
        ysh = np.array([b.gs_shunt + 1j * b.bs_shunt for b in net.buses])
        Ybus = Cf.T @ Yf + Ct.T @ Yt + sp.diags(ysh)
        eye = sp.identity(T, format="csr")
        self.Y = sp.kron(eye, Ybus, format="csr")
        self.Yf = sp.kron(eye, Yf, format="csr")
        self.Yt = sp.kron(eye, Yt, format="csr")
        self.Cf = sp.kron(eye, Cf, format="csr")
        self.Ct = sp.kron(eye, Ct, format="csr")

        # committed generator-periods are the only generation variables
        self.on = [(g, t) for t in range(T) for g in range(net.n_gen) if schedule.u[g, t]]
        self.pos = {gt: k for k, gt in enumerate(self.on)}
        ng = len(self.on)
        self.ng = ng
        gbus = [net.bus_index[net.generators[g].bus] + t * nb for g, t in self.on]
        self.Cg = sp.csr_matrix((np.ones(ng), (gbus, np.arange(ng))), shape=(NB, ng))
        self.n = 2 * NB + 2 * ng
        self.Pd = instance.pd.T.ravel()
        self.Qd = instance.qd.T.ravel()

        gens = net.generators
        self.c2 = np.array([gens[g].cost_quadratic for g, _ in self.on])
        self.c1 = np.array([gens[g].cost_linear for g, _ in self.on])
        top = max([1.0] + [abs(v) for v in np.r_[self.c1, self.c2]])
        self.obj_scale = 1.0 / top

        self.ref_rows = np.array([net.ref_bus + t * nb for t in range(T)])

        rated = np.array([math.isfinite(b.s_max) for b in net.branches])
        self.rated = np.flatnonzero(np.tile(rated, T))
        smax = np.array([b.s_max if math.isfinite(b.s_max) else 0.0 for b in net.branches])
        self.smax2 = np.tile(smax, T)[self.rated] ** 2

        self.vmax2 = np.tile([b.vmax**2 for b in net.buses], T)
        self.vmin2 = np.tile([b.vmin**2 for b in net.buses], T)

        ang = [l for l, b in enumerate(net.branches) if b.angle_bound < math.pi / 2]
        self.ang_i = np.concatenate([f_idx[ang] + t * nb for t in range(T)]).astype(int) if ang else np.zeros(0, int)
        self.ang_j = np.concatenate([t_idx[ang] + t * nb for t in range(T)]).astype(int) if ang else np.zeros(0, int)
        amax = np.tile([net.branches[l].angle_max for l in ang], T)
        amin = np.tile([net.branches[l].angle_min for l in ang], T)
        self.cmax, self.smax_a = np.cos(amax), np.sin(amax)
        self.cmin, self.smin_a = np.cos(amin), np.sin(amin)

        self._build_linear()

    def _build_linear(self) -> None:
        """Generation limits and ramping rows ``A x <= b``."""
        inst, net = self.instance, self.instance.network
        poff, qoff = 2 * self.NB, 2 * self.NB + self.ng
        data, ri, ci, b = [], [], [], []

        def row(entries, rhs):
            r = len(b)
            for j, v in entries:
                ri.append(r)
                ci.append(j)
                data.append(v)
            b.append(rhs)

        for k, (g, t) in enumerate(self.on):
            gen = net.generators[g]
            row([(poff + k, 1.0)], gen.pmax)
            row([(poff + k, -1.0)], -gen.pmin)
            row([(qoff + k, 1.0)], gen.qmax)
            row([(qoff + k, -1.0)], -gen.qmin)
        if self.T >= 2:
            for g, par in enumerate(inst.gen_params):
                for t in range(self.T):
                    tp = t - 1 if t > 0 else self.T - 1
                    cur = self.pos.get((g, t))
                    prev = self.pos.get((g, tp))
                    up = [] if cur is None else [(poff + cur, 1.0)]
                    up += [] if prev is None else [(poff + prev, -1.0)]
                    if up:
                        row(up, par.RU)
                        row([(j, -v) for j, v in up], par.RD)
        self.A = sp.csr_matrix((data, (ri, ci)), shape=(len(b), self.n))
        self.b = np.array(b, dtype=float)

    # -- pieces of x
    def split(self, x):
        NB, ng = self.NB, self.ng
        return x[:NB], x[NB:2 * NB], x[2 * NB:2 * NB + ng], x[2 * NB + ng:]

    def objective(self, x):
        _, _, p, _ = self.split(x)
        f = float(np.sum(self.c2 * p * p + self.c1 * p)) * self.obj_scale
        df = np.zeros(self.n)
        df[2 * self.NB:2 * self.NB + self.ng] = (2 * self.c2 * p + self.c1) * self.obj_scale
        return f, df

    def _s_and_jac(self, V, C, Ymat):
        """Complex power ``(C V) conj(Y V)`` and its derivatives in e and f."""
        I = Ymat @ V
        Vc = C @ V
        S = Vc * np.conj(I)
        A = sp.diags(np.conj(I)) @ C
        B = sp.diags(Vc) @ np.conj(Ymat)
        return S, (A + B).tocsr(), (1j * (A - B)).tocsr()

    def constraints(self, x):
        e, f, p, q = self.split(x)
        V = e + 1j * f
        NB, ng = self.NB, self.ng
        eye = sp.identity(NB, format="csr")
        S, dSe, dSf = self._s_and_jac(V, eye, self.Y)
        Cg = self.Cg
        zero = sp.csr_matrix((NB, ng))
        gP = S.real - Cg @ p + self.Pd
        gQ = S.imag - Cg @ q + self.Qd
        ref = sp.csr_matrix((np.ones(self.T), (np.arange(self.T), NB + self.ref_rows)), shape=(self.T, self.n))
        g = np.concatenate([gP, gQ, f[self.ref_rows]])
        dg = sp.vstack([
            sp.hstack([dSe.real, dSf.real, -Cg, zero]),
            sp.hstack([dSe.imag, dSf.imag, zero, -Cg]),
            ref,
        ], format="csr")

        hs, dhs = [], []
        pad = sp.csr_matrix((0, 2 * ng))
        if self.rated.size:
            for C, Ymat in ((self.Cf, self.Yf), (self.Ct, self.Yt)):
                Sl, de, df_ = self._s_and_jac(V, C, Ymat)
                Sl, de, df_ = Sl[self.rated], de[self.rated], df_[self.rated]
                P, Q = Sl.real, Sl.imag
                hs.append(P * P + Q * Q - self.smax2)
                dP = sp.hstack([de.real, df_.real])
                dQ = sp.hstack([de.imag, df_.imag])
                dhs.append(sp.diags(2 * P) @ dP + sp.diags(2 * Q) @ dQ)
        vm2 = e * e + f * f
        hs += [vm2 - self.vmax2, self.vmin2 - vm2]
        dv = sp.hstack([sp.diags(2 * e), sp.diags(2 * f)])
        dhs += [dv, -dv]
        if self.ang_i.size:
            i, j = self.ang_i, self.ang_j
            re = e[i] * e[j] + f[i] * f[j]
            im = f[i] * e[j] - e[i] * f[j]
            m = i.size
            r = np.arange(m)
            # d re / d(e_i, e_j, f_i, f_j) and d im likewise
            dre = sp.csr_matrix((np.r_[e[j], e[i], f[j], f[i]],
                                 (np.r_[r, r, r, r], np.r_[i, j, NB + i, NB + j])), shape=(m, 2 * NB))
            dim = sp.csr_matrix((np.r_[-f[j], f[i], e[j], -e[i]],
                                 (np.r_[r, r, r, r], np.r_[i, j, NB + i, NB + j])), shape=(m, 2 * NB))
            hs.append(im * self.cmax - re * self.smax_a)
            dhs.append(sp.diags(self.cmax) @ dim - sp.diags(self.smax_a) @ dre)
            hs.append(re * self.smin_a - im * self.cmin)
            dhs.append(sp.diags(self.smin_a) @ dre - sp.diags(self.cmin) @ dim)
        dh_nl = sp.vstack(dhs, format="csr") if dhs else sp.csr_matrix((0, 2 * NB))
        dh_nl = sp.hstack([dh_nl, sp.csr_matrix((dh_nl.shape[0], 2 * ng))])
        h = np.concatenate(hs + [self.A @ x - self.b])
        dh = sp.vstack([dh_nl, self.A], format="csr")
        del pad
        return g, h, dg, dh

    def hessian(self, x, lam, mu):
        e, f, p, q = self.split(x)
        V = e + 1j * f
        NB, ng = self.NB, self.ng
        lp, lq = lam[:NB], lam[NB:2 * NB]
        cY = np.conj(self.Y)
        Hv = _hess_form(sp.diags(lp) @ cY, imag=False) + _hess_form(sp.diags(lq) @ cY, imag=True)
        k = 0
        if self.rated.size:
            nr = self.rated.size
            for C, Ymat in ((self.Cf, self.Yf), (self.Ct, self.Yt)):
                m = mu[k:k + nr]
                k += nr
                Sl, de, df_ = self._s_and_jac(V, C, Ymat)
                Sl, de, df_ = Sl[self.rated], de[self.rated], df_[self.rated]
                dP = sp.hstack([de.real, df_.real]).tocsr()
                dQ = sp.hstack([de.imag, df_.imag]).tocsr()
                Hv = Hv + 2 * (dP.T @ sp.diags(m) @ dP + dQ.T @ sp.diags(m) @ dQ)
                Cr = C[self.rated]
                Yr = np.conj(Ymat[self.rated])
                Hv = Hv + _hess_form(Cr.T @ sp.diags(2 * m * Sl.real) @ Yr, imag=False)
                Hv = Hv + _hess_form(Cr.T @ sp.diags(2 * m * Sl.imag) @ Yr, imag=True)
        mmax, mmin = mu[k:k + NB], mu[k + NB:k + 2 * NB]
        k += 2 * NB
        d = 2 * (mmax - mmin)
        Hv = Hv + sp.diags(np.r_[d, d])
        if self.ang_i.size:
            m = self.ang_i.size
            m1, m2 = mu[k:k + m], mu[k + m:k + 2 * m]
            k += 2 * m
            w_im = m1 * self.cmax - m2 * self.cmin
            w_re = -m1 * self.smax_a + m2 * self.smin_a
            i, j = self.ang_i, self.ang_j
            # re = e_i e_j + f_i f_j ; im = f_i e_j - e_i f_j
            rows = np.r_[i, j, NB + i, NB + j, NB + i, j, i, NB + j]
            cols = np.r_[j, i, NB + j, NB + i, j, NB + i, NB + j, i]
            vals = np.r_[w_re, w_re, w_re, w_re, w_im, w_im, -w_im, -w_im]
            Hv = Hv + sp.csr_matrix((vals, (rows, cols)), shape=(2 * NB, 2 * NB))
        obj = sp.diags(np.r_[2 * self.c2 * self.obj_scale, np.zeros(ng)])
        return sp.block_diag([Hv, obj], format="csr")

    # -- starting points
    def flat_start(self) -> np.ndarray:
        net = self.instance.network
        x = np.zeros(self.n)
        x[:self.NB] = 1.0
        for k, (g, _) in enumerate(self.on):
            gen = net.generators[g]
            x[2 * self.NB + k] = 0.5 * (gen.pmin + gen.pmax)
            x[2 * self.NB + self.ng + k] = 0.5 * (gen.qmin + gen.qmax)
        return x

    def polar_start(self, vm, va, pg, qg) -> np.ndarray:
        x = np.zeros(self.n)
        x[:self.NB] = (vm * np.cos(va)).T.ravel()
        x[self.NB:2 * self.NB] = (vm * np.sin(va)).T.ravel()
        for k, (g, t) in enumerate(self.on):
            x[2 * self.NB + k] = pg[g, t]
            x[2 * self.NB + self.ng + k] = qg[g, t]
        return x

    def unpack(self, x):
        e, f, p, q = self.split(x)
        V = (e + 1j * f).reshape(self.T, self.nb).T
        pg = np.zeros((self.instance.network.n_gen, self.T))
        qg = np.zeros_like(pg)
        for k, (g, t) in enumerate(self.on):
            pg[g, t] = p[k]
            qg[g, t] = q[k]
        return np.abs(V), np.angle(V), pg, qg

    def flows(self, vm, va):
        V = (vm * np.exp(1j * va)).T.ravel()
        sf = (self.Cf @ V) * np.conj(self.Yf @ V)
        st = (self.Ct @ V) * np.conj(self.Yt @ V)
        shape = (self.T, self.nl)
        return (sf.real.reshape(shape).T, st.real.reshape(shape).T,
                sf.imag.reshape(shape).T, st.imag.reshape(shape).T)


def _warm_point(instance: UcInstance, sol: ConicSolution):
    """Polar point from a relaxation: ``|V| = sqrt(c_ii)``, angles along a BFS tree."""
    model = sol.model
    if model is None or sol.primal is None:
        raise ValueError("warm start needs a solution that carries its model")
    x = sol.primal
    net = instance.network
    T = instance.horizon
    vm = np.ones((net.n_bus, T))
    va = np.zeros((net.n_bus, T))
    pg = np.zeros((net.n_gen, T))
    qg = np.zeros((net.n_gen, T))
    incident = [[] for _ in range(net.n_bus)]
    for l, br in enumerate(net.branches):
        incident[net.bus_index[br.from_bus]].append(l)
        incident[net.bus_index[br.to_bus]].append(l)
    for t in range(1, T + 1):
        for k in range(net.n_bus):
            vm[k, t - 1] = math.sqrt(max(x[model.var("c_ii", k, t)], 1e-6))
        seen = {net.ref_bus}
        queue = deque([net.ref_bus])
        while queue:
            k = queue.popleft()
            for l in incident[k]:
                br = net.branches[l]
                i, j = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
                d = math.atan2(-x[model.var("s_ij", l, t)], x[model.var("c_ij", l, t)])
                if i == k and j not in seen:
                    va[j, t - 1] = va[i, t - 1] - d
                    seen.add(j)
                    queue.append(j)
                elif j == k and i not in seen:
                    va[i, t - 1] = va[j, t - 1] + d
                    seen.add(i)
                    queue.append(i)
        for g in range(net.n_gen):
            pg[g, t - 1] = x[model.var("p_gen", g, t)]
            if model.has_var("q_gen", g, t):
                qg[g, t - 1] = x[model.var("q_gen", g, t)]
    return vm, va, pg, qg


def recover_dispatch(
    instance: UcInstance,
    schedule: CommitmentSchedule,
    warm_start: ConicSolution | None = None,
    options: IpmOptions | None = None,
    feas_tol: float = FEAS_TOL,
) -> RecoveryOutcome:
    """Local AC OPF for ``schedule``: warm start (if given), then one flat start."""
    bad = schedule.violations(instance)
    if bad:
        raise ScheduleError(bad[0])
    prob = _AcProblem(instance, schedule)
    starts = []
    if warm_start is not None and warm_start.primal is not None:
        try:
            starts.append(("warm", prob.polar_start(*_warm_point(instance, warm_start))))
        except (KeyError, ValueError) as exc:
            log.info("warm start unusable (%s); flat start only", exc)
    starts.append(("flat", prob.flat_start()))

    outcome = RecoveryOutcome(status=LOCAL_INFEASIBLE)
    for name, x0 in starts:
        res = solve_nlp(prob.objective, prob.constraints, prob.hessian, x0, options)
        vm, va, pg, qg = prob.unpack(res.x)
        resid = evaluate_residuals(instance, schedule, vm, va, pg, qg)
        worst = max_residual(resid)
        outcome.attempts.append(f"{name}: {res.message}, {res.iterations} iterations, residual {worst:.2e}")
        log.info("recovery from %s start: %s", name, outcome.attempts[-1])
        if worst < outcome.max_residual:
            outcome.max_residual = worst
            outcome.iterations = res.iterations
            outcome.start = name
            outcome.message = res.message
        if worst <= feas_tol:
            pf, pt, qf, qt = prob.flows(vm, va)
            outcome.status = FEASIBLE
            outcome.dispatch = AcDispatch(
                vm=vm, va=va, pg=pg, qg=qg, p_fwd=pf, p_bwd=pt, q_fwd=qf, q_bwd=qt,
                cost=schedule_cost(instance, schedule, pg), max_residual=worst,
            )
            outcome.max_residual = worst
            outcome.iterations = res.iterations
            outcome.start = name
            outcome.message = res.message
            break
    return outcome


def write_dispatch(dispatch: AcDispatch, path) -> None:
    """Columnar text: a bus table ``t bus vm va`` then a generator table ``t gen p q``."""
    nb, T = dispatch.vm.shape
    ng = dispatch.pg.shape[0]
    out = [f"# cost {dispatch.cost:.17g} max_residual {dispatch.max_residual:.3e}", "# bus table", "t bus vm va"]
    for t in range(T):
        for k in range(nb):
            out.append(f"{t + 1} {k} {dispatch.vm[k, t]:.12f} {dispatch.va[k, t]:.12f}")
    out += ["# generator table", "t gen p q"]
    for t in range(T):
        for g in range(ng):
            out.append(f"{t + 1} {g} {dispatch.pg[g, t]:.12f} {dispatch.qg[g, t]:.12f}")
    Path(path).write_text("\n".join(out) + "\n")
