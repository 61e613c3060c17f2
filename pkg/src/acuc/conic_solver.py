"""Continuous conic solves (LP + SOC + small PSD) backed by Clarabel.

Dual sign convention, used throughout the package: for every linear row
``a'x (sense) b`` the reported multiplier ``y`` makes

    L(x, y) = objective(x) + sum_rows y * sigma * (a'x - b)

stationary, with ``sigma = -1`` for ``>=`` rows and ``+1`` otherwise. Hence
``y >= 0`` for both kinds of inequality row and ``y`` is free for ``==``
rows.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

from .model_ir import ModelIR, PsdConstraint

__all__ = [
    "ConicOptions",
    "ConicSolution",
    "PsdProjection",
    "ConeDimensionError",
    "solve_conic",
    "solve_small_psd",
    "psd_project_eig",
]

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"
TIME_LIMIT = "time_limit"


class ConeDimensionError(ValueError):
    pass


@dataclass
class ConicOptions:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    max_iters: int = 200
    time_limit_s: float = math.inf
    # residual acceptance for "almost solved" exits
    accept_feas: float = 1e-6
    # interior-point step fractions tried in turn after a numerical failure
    step_fractions: tuple[float, ...] = (0.99, 0.9, 0.8)


@dataclass
class ConicSolution:
    status: str
    primal: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = math.nan
    dual_objective: float = math.nan
    residuals: tuple[float, float, float] = (math.nan, math.nan, math.nan)
    solve_time: float = 0.0
    iterations: int = 0
    # the model this solution belongs to (lets callers interpret ``primal``)
    model: ModelIR | None = field(default=None, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class _Compiled:
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    a_le: sp.csr_matrix
    b_le: np.ndarray
    row_pos: np.ndarray  # position of each model row inside the eq/le blocks
    row_is_eq: np.ndarray
    row_sign: np.ndarray  # -1 for ">=" rows that were negated
    a_cone: sp.csr_matrix
    b_cone: np.ndarray
    soc_dims: list[int]
    psd_dims: list[int]
    c: np.ndarray
    key: tuple = field(default=())


def _affine_block(exprs, n, scale=None):
    data, ri, ci, b = [], [], [], []
    for k, (coeffs, const) in enumerate(exprs):
        s = 1.0 if scale is None else scale[k]
        for j, c in coeffs.items():
            ri.append(k)
            ci.append(j)
            data.append(-c * s)
        b.append(const * s)
    return sp.csr_matrix((data, (ri, ci)), shape=(len(exprs), n)), np.array(b, dtype=float)


def _compile(model: ModelIR) -> _Compiled:
    key = (
        id(model.rows), len(model.rows), id(model.socs), len(model.socs),
        id(model.rsocs), len(model.rsocs), id(model.psds), len(model.psds),
        model.n_vars, id(model.objective), len(model.objective),
    )
    cached = model.meta.get("_compiled")
    if cached is not None and cached.key == key:
        return cached
    n = model.n_vars
    eq_rows = [r for r in model.rows if r.sense == "=="]
    le_rows = [r for r in model.rows if r.sense != "=="]
    row_pos = np.empty(len(model.rows), dtype=int)
    row_is_eq = np.empty(len(model.rows), dtype=bool)
    row_sign = np.ones(len(model.rows))
    ke = kl = 0
    for k, r in enumerate(model.rows):
        if r.sense == "==":
            row_pos[k], row_is_eq[k] = ke, True
            ke += 1
        else:
            row_pos[k], row_is_eq[k] = kl, False
            if r.sense == ">=":
                row_sign[k] = -1.0
            kl += 1
    a_eq = model.row_matrix(eq_rows)
    b_eq = np.array([r.rhs for r in eq_rows], dtype=float)
    a_le = model.row_matrix(le_rows)
    signs = np.array([-1.0 if r.sense == ">=" else 1.0 for r in le_rows])
    if len(le_rows):
        a_le = sp.diags(signs) @ a_le
    b_le = np.array([r.rhs for r in le_rows], dtype=float) * (signs if len(le_rows) else 1)

    exprs, scale, soc_dims, psd_dims = [], [], [], []
    for cone in [*model.socs, *(c.as_soc() for c in model.rsocs)]:
        exprs.append(cone.head)
        exprs.extend(cone.tail)
        soc_dims.append(1 + len(cone.tail))
    scale = [1.0] * len(exprs)
    for cone in model.psds:
        if len(cone.entries) != cone.size * (cone.size + 1) // 2:
            raise ConeDimensionError("PSD entry count does not match its size")
        for j in range(cone.size):
            for i in range(j + 1):
                scale.append(1.0 if i == j else math.sqrt(2.0))
        exprs.extend(cone.entries)
        psd_dims.append(cone.size)
    for d in soc_dims:
        if d < 2:
            raise ConeDimensionError("second-order cone needs dimension >= 2")
    a_cone, b_cone = _affine_block(exprs, n, scale)

    c = np.zeros(n)
    for j, v in model.objective.items():
        c[j] += v
    comp = _Compiled(a_eq, b_eq, a_le, b_le, row_pos, row_is_eq, row_sign,
                     a_cone, b_cone, soc_dims, psd_dims, c, key)
    model.meta["_compiled"] = comp
    return comp


def _cone_residual(comp: _Compiled, x: np.ndarray) -> float:
    if not comp.soc_dims and not comp.psd_dims:
        return 0.0
    s = comp.b_cone - comp.a_cone @ x
    worst, k = 0.0, 0
    for d in comp.soc_dims:
        blk = s[k : k + d]
        worst = max(worst, float(np.linalg.norm(blk[1:]) - blk[0]) / (1.0 + abs(blk[0])))
        k += d
    for d in comp.psd_dims:
        m = np.zeros((d, d))
        for j in range(d):
            for i in range(j + 1):
                v = s[k] if i == j else s[k] / math.sqrt(2.0)
                m[i, j] = m[j, i] = v
                k += 1
        worst = max(worst, -float(np.linalg.eigvalsh(m)[0]))
    return worst


def solve_conic(
    model: ModelIR,
    options: ConicOptions | None = None,
    lo: np.ndarray | None = None,
    hi: np.ndarray | None = None,
) -> ConicSolution:
    """Solve the continuous conic program ``model``.

    Binary flags are ignored (callers relax or fix them). ``lo``/``hi``
    override the declared variable bounds without copying the model.
    """
    opts = options or ConicOptions()
    out = ConicSolution(status=NUMERICAL_FAILURE)
    spent = 0.0
    for step in opts.step_fractions:
        out = _solve_once(model, opts, lo, hi, step)
        spent += out.solve_time
        if out.status != NUMERICAL_FAILURE:
            break
    out.solve_time = spent
    out.model = model
    return out


def _solve_once(model, opts, lo, hi, step) -> ConicSolution:
    comp = _compile(model)
    n = model.n_vars
    if lo is None or hi is None:
        blo, bhi = model.bounds()
        lo = blo if lo is None else lo
        hi = bhi if hi is None else hi
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi + 1e-12):
        return ConicSolution(status=INFEASIBLE)

    fixed = np.flatnonzero(np.isfinite(lo) & (lo == hi))
    free = np.ones(n, dtype=bool)
    free[fixed] = False
    up = np.flatnonzero(free & np.isfinite(hi))
    down = np.flatnonzero(free & np.isfinite(lo))

    eye = sp.identity(n, format="csr")
    a_fix = eye[fixed]
    a_up = eye[up]
    a_down = -eye[down]
    n_eq = comp.a_eq.shape[0] + len(fixed)
    n_le = comp.a_le.shape[0] + len(up) + len(down)
    A = sp.vstack([comp.a_eq, a_fix, comp.a_le, a_up, a_down, comp.a_cone], format="csc")
    b = np.concatenate([comp.b_eq, lo[fixed], comp.b_le, hi[up], -lo[down], comp.b_cone])

    cones = []
    if n_eq:
        cones.append(clarabel.ZeroConeT(n_eq))
    if n_le:
        cones.append(clarabel.NonnegativeConeT(n_le))
    cones.extend(clarabel.SecondOrderConeT(d) for d in comp.soc_dims)
    cones.extend(clarabel.PSDTriangleConeT(d) for d in comp.psd_dims)

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_feas = opts.tol_feas
    settings.tol_gap_abs = opts.tol_gap
    settings.tol_gap_rel = opts.tol_gap
    settings.max_iter = opts.max_iters
    settings.max_step_fraction = step
    if math.isfinite(opts.time_limit_s):
        settings.time_limit = max(opts.time_limit_s, 1e-3)
    P = sp.csc_matrix((n, n))
    t0 = time.perf_counter()
    # cost coefficients span several orders of magnitude; solve with a
    # normalised objective and scale duals back
    c_scale = max(1.0, float(np.abs(comp.c).max(initial=0.0)))
    solver = clarabel.DefaultSolver(P, comp.c / c_scale, A, b, cones, settings)
    sol = solver.solve()
    elapsed = time.perf_counter() - t0
    status = str(sol.status)

    if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return ConicSolution(status=INFEASIBLE, solve_time=elapsed, iterations=sol.iterations)
    if status in ("DualInfeasible", "AlmostDualInfeasible"):
        return ConicSolution(status=UNBOUNDED, solve_time=elapsed, iterations=sol.iterations)

    x = np.array(sol.x)
    z = np.array(sol.z) * c_scale
    if x.size != n or not np.all(np.isfinite(x)):
        return ConicSolution(status=NUMERICAL_FAILURE, solve_time=elapsed)

    # duals of model rows
    y = np.zeros(len(model.rows))
    z_eq = z[: comp.a_eq.shape[0]]
    z_le = z[n_eq : n_eq + comp.a_le.shape[0]]
    eq = comp.row_is_eq
    y[eq] = z_eq[comp.row_pos[eq]]
    y[~eq] = z_le[comp.row_pos[~eq]]

    # residuals are relative to 1 + |rhs| (cones: 1 + |head|)
    r_eq = (np.abs(comp.a_eq @ x - comp.b_eq) / (1.0 + np.abs(comp.b_eq))).max(initial=0.0)
    r_le = ((comp.a_le @ x - comp.b_le) / (1.0 + np.abs(comp.b_le))).max(initial=0.0)
    r_bd = max(float((lo - x).max(initial=-np.inf)), float((x - hi).max(initial=-np.inf)), 0.0)
    primal_res = max(r_eq, r_le, r_bd, _cone_residual(comp, x))
    obj = float(comp.c @ x) + model.objective_constant
    dual_obj = float(sol.obj_val_dual) * c_scale + model.objective_constant
    gap = abs(obj - dual_obj) / max(1.0, abs(obj))
    residuals = (primal_res, float("nan"), gap)

    if status == "Solved":
        st = OPTIMAL
    elif status == "AlmostSolved" and primal_res <= opts.accept_feas and gap <= 1e-5:
        st = OPTIMAL
    elif status == "MaxTime":
        st = TIME_LIMIT
    elif status in ("MaxIterations", "InsufficientProgress", "NumericalError", "AlmostSolved"):
        ok = primal_res <= opts.accept_feas and gap <= 1e-6
        st = OPTIMAL if ok else NUMERICAL_FAILURE
    else:
        st = NUMERICAL_FAILURE
    if st != OPTIMAL:
        log.debug("conic solve ended with %s (res %.2e, gap %.2e)", status, primal_res, gap)
    return ConicSolution(
        status=st,
        primal=x,
        duals=y,
        objective=obj,
        dual_objective=dual_obj,
        residuals=residuals,
        solve_time=elapsed,
        iterations=sol.iterations,
    )


# --------------------------------------------------------------------------
# projection onto PSD-completable partial Hermitian matrices


@dataclass
class PsdProjection:
    status: str
    point: np.ndarray | None = None
    normal: np.ndarray | None = None
    weights: np.ndarray | None = None


def _coordinate_weights(coords) -> np.ndarray:
    return np.array([1.0 if k == l else 2.0 for k, l, _ in coords])


def solve_small_psd(
    size: int,
    coords: list[tuple[int, int, str]],
    target,
    options: ConicOptions | None = None,
) -> PsdProjection:
    """Project ``target`` onto the set of partial matrices with a PSD completion.

    ``coords`` names the pattern entries: ``(k, k, "re")`` for a diagonal
    entry and ``(k, l, "re")`` / ``(k, l, "im")`` for the real and imaginary
    parts of ``W[k, l]`` (``k < l``). The same pair may appear more than
    once. Distances are Frobenius distances on the Hermitian matrix, so
    off-diagonal coordinates carry weight 2.

    Returns the projected point and ``normal = target - point``; for every
    completable ``y``, ``sum(weights * normal * y) <= 0``.
    """
    if size > 20:
        raise ValueError("PSD projection is meant for patterns of at most 20 nodes")
    target = np.asarray(target, dtype=float)
    w = _coordinate_weights(coords)

    # real embedding [[A, -B], [B, A]] of the Hermitian matrix A + iB
    m = ModelIR(name="psd-projection")
    a = {}
    bvar = {}
    for j in range(size):
        for i in range(j + 1):
            a[i, j] = m.add_var("aux", ("A", i, j))
            if i < j:
                bvar[i, j] = m.add_var("aux", ("B", i, j))

    def a_ent(i, j):
        return a[min(i, j), max(i, j)]

    def b_ent(i, j):
        # B is skew symmetric
        if i == j:
            return None, 0.0
        if i < j:
            return bvar[i, j], 1.0
        return bvar[j, i], -1.0

    entries = []
    n2 = 2 * size
    for col in range(n2):
        for row in range(col + 1):
            bi, bj = row % size, col % size
            top_r, top_c = row < size, col < size
            if top_r == top_c:
                entries.append(({a_ent(bi, bj): 1.0}, 0.0))
            else:
                # lower-left block is B, upper-right is -B
                j, sgn = b_ent(bi, bj)
                if j is None:
                    entries.append(({}, 0.0))
                else:
                    sgn = sgn if not top_r else -sgn
                    entries.append(({j: sgn}, 0.0))
    m.psds.append(PsdConstraint(n2, entries))

    tau = m.add_var("aux", ("tau",))
    tail = []
    for (k, l, part), tv, wt in zip(coords, target, w):
        if k == l:
            j, sgn = a_ent(k, k), 1.0
        elif part == "re":
            j, sgn = a_ent(k, l), 1.0
        else:
            j, sgn = b_ent(k, l)
        tail.append(({j: math.sqrt(wt) * sgn}, -math.sqrt(wt) * tv))
    m.add_soc(({tau: 1.0}, 0.0), tail)
    m.add_objective(tau, 1.0)

    opts = options or ConicOptions(tol_feas=1e-10, tol_gap=1e-10)
    sol = solve_conic(m, opts)
    if not sol.ok:
        return PsdProjection(status=sol.status)
    x = sol.primal
    point = np.empty(len(coords))
    for r, (k, l, part) in enumerate(coords):
        if k == l or part == "re":
            point[r] = x[a_ent(k, l)]
        else:
            j, sgn = b_ent(k, l)
            point[r] = sgn * x[j]
    return PsdProjection(status=OPTIMAL, point=point, normal=target - point, weights=w)


def psd_project_eig(mat: np.ndarray) -> np.ndarray:
    """Frobenius projection of a full Hermitian matrix onto the PSD cone."""
    vals, vecs = np.linalg.eigh(mat)
    return (vecs * np.clip(vals, 0, None)) @ vecs.conj().T
