"""Branch-and-bound for mixed-binary conic models.

Node relaxations are continuous conic programs solved with
:func:`~acuc.conic_solver.solve_conic` under per-node bound overrides.
Nodes are explored best-bound first. Branching prefers the most fractional
commitment variable ``u`` and only falls back to ``v``/``w`` once every
``u`` is integral; ties go to the lexicographically smallest
``(generator, period)``.

When the model carries a unit commitment instance in ``model.meta`` a
rounding heuristic turns relaxation values into a logically valid schedule,
fixes it and solves the resulting continuous problem to seed the incumbent.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .conic_solver import ConicOptions, ConicSolution, solve_conic
from .model_ir import LinearRow, ModelIR
from .schedule import CommitmentSchedule, ScheduleError

__all__ = [
    "CommitmentSchedule",
    "MipResult",
    "MipError",
    "FixingError",
    "solve_misocp",
    "fix_binaries",
    "extract_schedule",
    "repair_commitment",
]

log = logging.getLogger(__name__)

INT_TOL = 1e-6
OPTIMAL_WITHIN_GAP = "optimal_within_gap"
INFEASIBLE = "infeasible"
TIME_LIMIT = "time_limit"


class MipError(RuntimeError):
    pass


class FixingError(ValueError):
    pass


@dataclass
class MipResult:
    status: str
    incumbent_obj: float = math.inf
    best_bound: float = -math.inf
    schedule: CommitmentSchedule | None = None
    node_count: int = 0
    wall_time: float = 0.0
    primal: np.ndarray | None = None
    root_bound: float = -math.inf
    bound_trace: list[float] = field(default_factory=list)
    log: list[str] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return relative_gap(self.incumbent_obj, self.best_bound)


def relative_gap(incumbent: float, bound: float, eps: float = 1e-9) -> float:
    if not math.isfinite(incumbent) or not math.isfinite(bound):
        return math.inf
    return max(0.0, incumbent - bound) / max(abs(incumbent), eps)


# --------------------------------------------------------------------------
# fixing


def _u_index(model: ModelIR, kind: str):
    """Map ``(g, t) -> column`` for one commitment kind."""
    return {v.index: j for j, v in enumerate(model.variables) if v.kind == kind}


def fix_binaries(
    model: ModelIR,
    schedule: CommitmentSchedule | None = None,
    partial: dict | None = None,
) -> ModelIR:
    """Copy of ``model`` with commitment binaries fixed through equal bounds.

    ``schedule`` fixes every ``u``/``v``/``w``. ``partial`` maps
    ``(g, t)`` (meaning ``u``) or ``(kind, g, t)`` to 0/1; periods are
    1-based.
    """
    fixes: dict[tuple[str, int, int], int] = {}
    if schedule is not None:
        n_gen, T = schedule.shape
        for kind in ("u", "v", "w"):
            arr = getattr(schedule, kind)
            for g in range(n_gen):
                for t in range(1, T + 1):
                    fixes[(kind, g, t)] = int(arr[g, t - 1])
    for key, val in (partial or {}).items():
        k = ("u", *key) if len(key) == 2 else tuple(key)
        if val not in (0, 1):
            raise FixingError(f"fixing value for {k} must be 0 or 1")
        if fixes.get(k, val) != val:
            raise FixingError(f"{k} fixed to both values")
        fixes[k] = int(val)
    for (kind, g, t), val in fixes.items():
        if kind == "u":
            if val == 0 and fixes.get(("v", g, t)) == 1:
                raise FixingError(f"generator {g} period {t}: startup while fixed off")
            if val == 1 and fixes.get(("w", g, t)) == 1:
                raise FixingError(f"generator {g} period {t}: shutdown while fixed on")
    out = model.copy()
    for (kind, g, t), val in fixes.items():
        if not out.has_var(kind, g, t):
            raise FixingError(f"model has no variable {kind}[{g},{t}]")
        var = out.variables[out.var(kind, g, t)]
        var.lo = var.hi = float(val)
    return out


def extract_schedule(model: ModelIR, x: np.ndarray) -> CommitmentSchedule | None:
    """Rounded commitment schedule stored in ``x`` (``None`` for models without ``u``)."""
    inst = model.meta.get("instance")
    if inst is None or not model.has_var("u", 0, 1):
        return None
    n_gen, T = inst.network.n_gen, inst.horizon
    arr = {k: np.zeros((n_gen, T)) for k in ("u", "v", "w")}
    for kind in arr:
        for g in range(n_gen):
            for t in range(1, T + 1):
                arr[kind][g, t - 1] = x[model.var(kind, g, t)]
    return CommitmentSchedule(u=np.rint(arr["u"]), v=np.rint(arr["v"]), w=np.rint(arr["w"]))


def repair_commitment(u, instance) -> CommitmentSchedule:
    """Smallest-change repair of an on/off pattern that only ever switches units on.

    Startups extend on-runs to the minimum uptime and off-runs shorter than
    the minimum downtime are filled. Switching on only is monotone, so the
    loop ends at the latest at the all-on schedule.
    """
    u = np.array(np.rint(u), dtype=int)
    T = u.shape[1]
    for g, par in enumerate(instance.gen_params):
        while True:
            row = u[g]
            if row.all() or not row.any():
                break
            changed = False
            for t in range(T):
                if row[t] == 1 and row[t - 1] == 0:
                    for j in range(par.MinUp):
                        if row[(t + j) % T] == 0:
                            row[(t + j) % T] = 1
                            changed = True
                if row[t] == 0 and row[t - 1] == 1:
                    run = 0
                    while run < T and row[(t + run) % T] == 0:
                        run += 1
                    if run < par.MinDw:
                        for j in range(run):
                            row[(t + j) % T] = 1
                        changed = True
            if not changed:
                break
    sched = CommitmentSchedule.from_u(u)
    if not sched.is_valid(instance):
        raise ScheduleError("repair did not produce a valid schedule")
    return sched


# --------------------------------------------------------------------------
# search


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lo: np.ndarray = field(compare=False)
    hi: np.ndarray = field(compare=False)
    depth: int = field(compare=False, default=0)


def _with_cuts(model: ModelIR, cuts) -> ModelIR:
    if not cuts:
        return model
    out = model.copy()
    for c in cuts:
        out.add_row(c.coeffs, getattr(c, "sense", "<="), c.rhs, getattr(c, "key", ("cut",)))
    return out


def _branch_candidate(model: ModelIR, x: np.ndarray, binaries: list[int]) -> int | None:
    best_u, best_other = None, None
    for j in binaries:
        frac = abs(x[j] - round(x[j]))
        if frac <= INT_TOL:
            continue
        var = model.variables[j]
        score = (-frac, var.index)
        if var.kind == "u":
            if best_u is None or score < best_u[0]:
                best_u = (score, j)
        elif best_other is None or (score, var.kind) < best_other[0]:
            best_other = ((score, var.kind), j)
    if best_u is not None:
        return best_u[1]
    return None if best_other is None else best_other[1]


def _elastic_mismatch(model: ModelIR, lo, hi, opts, tags=("2b", "2c", "4b")) -> float:
    """Smallest total balance mismatch over the node's feasible set.

    Interior-point exits on infeasible nodes are sometimes inconclusive;
    the elastic problem is always feasible and answers the question instead.
    Returns ``nan`` when it cannot be solved either.
    """
    e = model.copy()
    e.objective = {}
    e.objective_constant = 0.0
    elo, ehi = list(lo), list(hi)
    for k, r in enumerate(e.rows):
        if r.tag in tags and r.sense == "==":
            sp = e.add_var("aux", ("elastic+", k), 0.0)
            sm = e.add_var("aux", ("elastic-", k), 0.0)
            elo += [0.0, 0.0]
            ehi += [math.inf, math.inf]
            coeffs = dict(r.coeffs)
            coeffs[sp] = 1.0
            coeffs[sm] = -1.0
            e.rows[k] = LinearRow(coeffs, r.sense, r.rhs, r.key)
            e.add_objective(sp, 1.0)
            e.add_objective(sm, 1.0)
    if not e.objective:
        return math.nan
    sol = solve_conic(e, opts, np.array(elo), np.array(ehi))
    return sol.objective if sol.ok else math.nan


def _fixed_solve(model, x, binaries, lo, hi, opts) -> ConicSolution:
    flo, fhi = lo.copy(), hi.copy()
    r = np.clip(np.rint(x[binaries]), lo[binaries], hi[binaries])
    flo[binaries] = fhi[binaries] = r
    return solve_conic(model, opts, flo, fhi)


def _heuristic(model, sol, binaries, lo, hi, opts) -> tuple[float, np.ndarray] | None:
    """Round, repair and re-solve; the first candidate that solves wins."""
    inst = model.meta.get("instance")
    if inst is None or not model.has_var("u", 0, 1):
        return _generic_heuristic(model, sol, binaries, lo, hi, opts)
    n_gen, T = inst.network.n_gen, inst.horizon
    uf = np.array([[sol.primal[model.var("u", g, t)] for t in range(1, T + 1)] for g in range(n_gen)])
    tried = []
    for pattern in (uf >= 0.5, uf > INT_TOL, np.ones_like(uf, dtype=bool)):
        try:
            sched = repair_commitment(pattern.astype(int), inst)
        except ScheduleError:
            continue
        if any(sched == s for s in tried):
            continue
        tried.append(sched)
        flo, fhi = lo.copy(), hi.copy()
        ok = True
        for kind in ("u", "v", "w"):
            arr = getattr(sched, kind)
            for g in range(n_gen):
                for t in range(1, T + 1):
                    j = model.var(kind, g, t)
                    val = float(arr[g, t - 1])
                    if val < lo[j] or val > hi[j]:
                        ok = False
                    flo[j] = fhi[j] = val
        if not ok:
            continue
        res = solve_conic(model, opts, flo, fhi)
        if res.ok:
            return res.objective, res.primal
    return None


def _generic_heuristic(model, sol, binaries, lo, hi, opts) -> tuple[float, np.ndarray] | None:
    """Rounding for models without a full horizon: fix ``u`` by a pattern,
    solve, then fix the remaining binaries at their rounded values."""
    if not binaries:
        return None
    x = sol.primal
    ucols = [j for j in binaries if model.variables[j].kind == "u"]
    for pattern in (0.5, INT_TOL, -1.0):
        flo, fhi = lo.copy(), hi.copy()
        ok = True
        for j in ucols:
            val = 1.0 if x[j] > pattern else 0.0
            if val < lo[j] or val > hi[j]:
                val = lo[j]
            flo[j] = fhi[j] = val
        res = solve_conic(model, opts, flo, fhi)
        if not res.ok:
            continue
        for j in binaries:
            val = float(np.rint(res.primal[j]))
            if val < lo[j] or val > hi[j]:
                ok = False
            flo[j] = fhi[j] = val
        if not ok:
            continue
        res = solve_conic(model, opts, flo, fhi)
        if res.ok:
            return res.objective, res.primal
    return None


def solve_misocp(
    model: ModelIR,
    rel_gap_target: float = 1e-3,
    time_limit: float = math.inf,
    extra_cuts=(),
    options: ConicOptions | None = None,
    max_nodes: int | None = None,
    log_every: int = 10,
    heuristic_every: int = 20,
) -> MipResult:
    """Best-bound branch-and-bound on the binaries of ``model``.

    A node whose relaxation fails numerically is dropped from the tree but its
    bound caps the reported ``best_bound``, which therefore stays valid.
    """
    if not 0 < rel_gap_target < 1:
        raise ValueError("rel_gap_target must lie in (0, 1)")
    t0 = time.perf_counter()
    work = _with_cuts(model, list(extra_cuts))
    # node relaxations only supply bounds, so near-optimal exits are accepted
    opts = options or ConicOptions(accept_feas=1e-4)
    binaries = work.binaries()
    lo0, hi0 = work.bounds()
    lo0 = lo0.copy()
    hi0 = hi0.copy()
    for j in binaries:
        lo0[j] = max(lo0[j], 0.0)
        hi0[j] = min(hi0[j], 1.0)

    result = MipResult(status=TIME_LIMIT)
    unresolved = math.inf
    incumbent = math.inf
    inc_x = None

    def elapsed() -> float:
        return time.perf_counter() - t0

    def emit(node_no: int, n_open: int, bound: float) -> None:
        line = (f"{node_no}, {n_open}, {bound:.6f}, {incumbent:.6f}, "
                f"{relative_gap(incumbent, bound):.6f}, {elapsed():.2f}")
        result.log.append(line)
        log.info(line)

    root = solve_conic(work, opts, lo0, hi0)
    result.node_count = 1
    if root.status == "infeasible":
        result.status = INFEASIBLE
        result.wall_time = elapsed()
        return result
    if not root.ok:
        raise MipError(f"root relaxation failed: {root.status}")
    result.root_bound = root.objective
    best_bound = root.objective
    result.bound_trace.append(best_bound)

    heur = _heuristic(work, root, binaries, lo0, hi0, opts)
    if heur is not None:
        incumbent, inc_x = heur

    heap: list[_Node] = []
    seq = 0
    pending: tuple[_Node, ConicSolution] | None = (_Node(root.objective, seq, lo0, hi0), root)
    emit(1, 0, best_bound)

    while True:
        if pending is None:
            if not heap:
                # tree exhausted: the incumbent is optimal
                if inc_x is not None:
                    best_bound = max(best_bound, min(incumbent, unresolved))
                break
            node_bound = heap[0].bound
            best_bound = max(best_bound, min(node_bound, incumbent, unresolved))
            result.bound_trace.append(best_bound)
            if relative_gap(incumbent, best_bound) <= rel_gap_target:
                break
            if elapsed() >= time_limit or (max_nodes is not None and result.node_count >= max_nodes):
                result.wall_time = elapsed()
                result.best_bound = best_bound
                result.incumbent_obj = incumbent
                result.status = TIME_LIMIT
                return _finish(result, work, inc_x)
            node = heapq.heappop(heap)
            if node.bound >= incumbent - 1e-9 * max(1.0, abs(incumbent)):
                continue
            sol = solve_conic(work, opts, node.lo, node.hi)
            result.node_count += 1
            if result.node_count % log_every == 0:
                emit(result.node_count, len(heap), best_bound)
        else:
            node, sol = pending
            pending = None
        if not sol.ok:
            if sol.status != "infeasible" and _elastic_mismatch(work, node.lo, node.hi, opts) > 1e-6:
                continue
            if sol.status != "infeasible":
                log.warning("node relaxation ended with %s; bound capped at %.6f", sol.status, node.bound)
                unresolved = min(unresolved, node.bound)
            continue
        if heuristic_every and result.node_count % heuristic_every == 0:
            heur = _heuristic(work, sol, binaries, node.lo, node.hi, opts)
            if heur is not None and heur[0] < incumbent:
                incumbent, inc_x = heur
        if sol.objective >= incumbent - 1e-9 * max(1.0, abs(incumbent)):
            continue
        j = _branch_candidate(work, sol.primal, binaries)
        if j is None:
            exact = _fixed_solve(work, sol.primal, binaries, node.lo, node.hi, opts)
            cand = exact if exact.ok else sol
            if cand.objective < incumbent:
                incumbent, inc_x = cand.objective, cand.primal
            continue
        for val in (0.0, 1.0):
            lo, hi = node.lo.copy(), node.hi.copy()
            lo[j] = hi[j] = val
            seq += 1
            heapq.heappush(heap, _Node(max(sol.objective, node.bound), seq, lo, hi, node.depth + 1))

    result.wall_time = elapsed()
    if inc_x is None:
        result.status = INFEASIBLE
        return result
    result.status = OPTIMAL_WITHIN_GAP
    result.incumbent_obj = incumbent
    result.best_bound = min(best_bound, incumbent)
    result.bound_trace.append(result.best_bound)
    emit(result.node_count, len(heap), result.best_bound)
    return _finish(result, work, inc_x)


def _finish(result: MipResult, model: ModelIR, x) -> MipResult:
    if x is not None:
        result.primal = x
        sched = extract_schedule(model, x)
        if sched is not None:
            bad = sched.violations(model.meta["instance"])
            if bad:
                raise MipError("incumbent schedule violates the logical system: " + bad[0])
        result.schedule = sched
    return result
