"""Temporal decomposition of the strengthened MISOCP relaxation.

The horizon is cut into contiguous blocks. Every linear row whose variables
belong to more than one block (ramping at a block start, the logical
equality at a block start and minimum up/down windows that cross a seam) is
moved into the objective with a multiplier. The block subproblems then
separate, and the sum of their proven bounds plus the row constants is a
valid lower bound for any multipliers in the sign domain.

Multipliers use the dual convention of :mod:`acuc.conic_solver`: a row
``a'x (sense) b`` contributes ``lam * sigma * (a'x - b)`` with
``sigma = -1`` for ``>=`` rows, so inequality multipliers are non-negative
and equality multipliers are free. Solver duals therefore copy over as is.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .branch_and_bound import MipError, MipResult, fix_binaries, relative_gap, solve_misocp
from .conic_solver import OPTIMAL, ConicOptions, ConicSolution, solve_conic
from .cuts import strengthen_model
from .feasibility import recover_dispatch, RecoveryOutcome
from .formulation import build_misocp
from .instance_gen import UcInstance
from .model_ir import ModelIR
from .schedule import CommitmentSchedule

__all__ = [
    "BlockPartition",
    "MultiplierSet",
    "DecompositionError",
    "IterationRecord",
    "DecompositionResult",
    "coupling_rows",
    "init_multipliers",
    "build_block_subproblem",
    "lagrangian_bound",
    "restricted_schedule",
    "subgradient_update",
    "run_decomposition",
]

log = logging.getLogger(__name__)

FAMILIES = ("ru", "rd", "log", "up", "dw")


class DecompositionError(RuntimeError):
    pass


@dataclass(frozen=True)
class BlockPartition:
    horizon: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen = [t for blk in self.blocks for t in blk]
        if sorted(seen) != list(range(1, self.horizon + 1)):
            raise ValueError("blocks must partition the periods 1..horizon")
        for blk in self.blocks:
            if not blk or list(blk) != list(range(blk[0], blk[-1] + 1)):
                raise ValueError("blocks must be non-empty runs of consecutive periods")

    @classmethod
    def uniform(cls, horizon: int, b: int) -> "BlockPartition":
        if b < 1 or horizon % b:
            raise ValueError(f"{b} blocks do not divide a horizon of {horizon}")
        size = horizon // b
        return cls(horizon, tuple(tuple(range(k * size + 1, (k + 1) * size + 1)) for k in range(b)))

    @property
    def b(self) -> int:
        return len(self.blocks)

    def block_of(self, t: int) -> int:
        for k, blk in enumerate(self.blocks):
            if blk[0] <= t <= blk[-1]:
                return k
        raise KeyError(t)

    def first(self, k: int) -> int:
        return self.blocks[k][0]

    def last(self, k: int) -> int:
        return self.blocks[k][-1]

    def outside(self, k: int) -> set[int]:
        return set(range(1, self.horizon + 1)) - set(self.blocks[k])

    def uptime_interface(self, inst: UcInstance, g: int, t: int, k: int) -> list[int]:
        """Periods of the uptime window of ``(g, t)`` that lie outside block ``k``."""
        out = self.outside(k)
        return [tau for tau in inst.uptime_window(g, t) if tau in out]

    def downtime_interface(self, inst: UcInstance, g: int, t: int, k: int) -> list[int]:
        out = self.outside(k)
        return [tau for tau in inst.downtime_window(g, t) if tau in out]

    def classify(self, inst: UcInstance, g: int, k: int) -> dict[str, list[int]]:
        """Periods whose window straddles block ``k`` (r1, r3) or reaches outside it (r2, r4)."""
        inside = set(self.blocks[k])
        sets: dict[str, list[int]] = {"r1": [], "r2": [], "r3": [], "r4": []}
        for t in range(1, self.horizon + 1):
            up = set(inst.uptime_window(g, t))
            dw = set(inst.downtime_window(g, t))
            if up & inside and not up <= inside:
                sets["r1"].append(t)
            if self.uptime_interface(inst, g, t, k):
                sets["r2"].append(t)
            if dw & inside and not dw <= inside:
                sets["r3"].append(t)
            if self.downtime_interface(inst, g, t, k):
                sets["r4"].append(t)
        return sets


def _family(key: tuple) -> str | None:
    tag = key[0] if key else ""
    if tag == "2f":
        return "ru" if key[-1] == "up" else "rd"
    return {"5b": "log", "5e": "up", "5f": "dw"}.get(tag)


@dataclass
class MultiplierSet:
    """One multiplier per relaxed row, keyed by the row key ``(tag, g, t, ...)``."""

    values: dict[tuple, float] = field(default_factory=dict)
    free: frozenset = frozenset()

    def copy(self) -> "MultiplierSet":
        return MultiplierSet(dict(self.values), self.free)

    def project(self) -> "MultiplierSet":
        out = self.copy()
        for key, val in out.values.items():
            if key not in self.free and val < 0.0:
                out.values[key] = 0.0
        return out

    def family(self, name: str) -> dict[tuple[int, int], float]:
        """Multipliers of one family indexed by ``(generator, period)``."""
        if name not in FAMILIES:
            raise KeyError(name)
        return {(k[1], k[2]): v for k, v in self.values.items() if _family(k) == name}

    def in_domain(self) -> bool:
        return all(v >= 0.0 for k, v in self.values.items() if k not in self.free)

    def __len__(self) -> int:
        return len(self.values)


def _period_blocks(model: ModelIR, partition: BlockPartition) -> np.ndarray:
    return np.array([partition.block_of(v.index[-1]) for v in model.variables], dtype=int)


def coupling_rows(model: ModelIR, partition: BlockPartition) -> list[int]:
    """Rows of ``model`` whose variables lie in more than one block."""
    owner = _period_blocks(model, partition)
    out = []
    for r, row in enumerate(model.rows):
        if len({int(owner[j]) for j in row.coeffs}) > 1:
            if _family(row.key) is None:
                raise DecompositionError(f"row {row.key} couples blocks but has no multiplier family")
            out.append(r)
    return out


def _sigma(sense: str) -> float:
    return -1.0 if sense == ">=" else 1.0


def init_multipliers(
    model: ModelIR,
    partition: BlockPartition,
    options: ConicOptions | None = None,
) -> tuple[MultiplierSet, ConicSolution | None]:
    """Duals of the coupling rows at the continuous relaxation optimum."""
    rows = coupling_rows(model, partition)
    free = frozenset(model.rows[r].key for r in rows if model.rows[r].sense == "==")
    lam = MultiplierSet({model.rows[r].key: 0.0 for r in rows}, free)
    if not rows:
        return lam, None
    sol = solve_conic(model.relaxed(), options)
    if not sol.ok or sol.duals is None:
        log.warning("relaxation for multipliers ended with %s; starting from zero", sol.status)
        return lam, sol
    for r in rows:
        lam.values[model.rows[r].key] = float(sol.duals[r])
    return lam.project(), sol


def _remap(expr, new):
    coeffs, const = expr
    return {new[j]: c for j, c in coeffs.items()}, const


def build_block_subproblem(
    model: ModelIR,
    partition: BlockPartition,
    block_index: int,
    multipliers: MultiplierSet,
) -> ModelIR:
    """Block ``block_index`` of ``model`` with coupling rows priced by ``multipliers``.

    Variables keep their keys, so ``sub.var("u", g, t)`` works for periods in
    the block. The row constants of the priced rows are not included; see
    :func:`lagrangian_constant`.
    """
    owner = _period_blocks(model, partition)
    keep = np.flatnonzero(owner == block_index)
    inside = set(int(j) for j in keep)
    sub = ModelIR(name=f"{model.name}-block{block_index + 1}")
    sub.meta = {
        "network": model.meta.get("network"),
        "horizon": model.meta.get("horizon"),
        "block": block_index,
        "periods": partition.blocks[block_index],
    }
    new: dict[int, int] = {}
    for j in keep:
        v = model.variables[j]
        new[int(j)] = sub.add_var(v.kind, v.index, v.lo, v.hi, v.binary)
    for row in model.rows:
        cols = set(row.coeffs)
        if cols <= inside:
            sub.add_row({new[j]: c for j, c in row.coeffs.items()}, row.sense, row.rhs, row.key)
        elif cols & inside:
            lam = multipliers.values.get(row.key)
            if lam is None:
                raise DecompositionError(f"row {row.key} couples blocks but has no multiplier")
            scale = lam * _sigma(row.sense)
            for j, c in row.coeffs.items():
                if j in inside and scale:
                    sub.add_objective(new[j], scale * c)
    for cone in model.socs:
        cols = set(cone.head[0]).union(*(set(e[0]) for e in cone.tail))
        if cols <= inside:
            sub.add_soc(_remap(cone.head, new), [_remap(e, new) for e in cone.tail], cone.key)
        elif cols & inside:
            raise DecompositionError(f"cone {cone.key} couples blocks")
    for cone in model.rsocs:
        cols = set(cone.left[0]) | set(cone.right[0]) | set().union(*(set(e[0]) for e in cone.tail))
        if cols <= inside:
            sub.add_rsoc(_remap(cone.left, new), _remap(cone.right, new), [_remap(e, new) for e in cone.tail],
                         cone.key)
        elif cols & inside:
            raise DecompositionError(f"cone {cone.key} couples blocks")
    if model.psds:
        raise DecompositionError("PSD constraints are not supported in block subproblems")
    for j, c in model.objective.items():
        if j in inside:
            sub.add_objective(new[j], c)
    sub.meta["columns"] = new
    return sub


def lagrangian_constant(model: ModelIR, multipliers: MultiplierSet) -> float:
    """Objective constant plus ``-lam * sigma * b`` over the priced rows, counted once."""
    total = model.objective_constant
    for row in model.rows:
        lam = multipliers.values.get(row.key)
        if lam:
            total -= lam * _sigma(row.sense) * row.rhs
    return total


@dataclass
class BlockSolutions:
    results: list[MipResult]
    models: list[ModelIR]
    x: np.ndarray  # full-model point assembled from the block incumbents
    lb: float
    constant: float


def lagrangian_bound(
    model: ModelIR,
    partition: BlockPartition,
    multipliers: MultiplierSet,
    rel_gap: float = 0.01,
    time_limit: float = math.inf,
    options: ConicOptions | None = None,
) -> tuple[float, BlockSolutions]:
    """Sum of block best bounds plus the relaxed-row constants.

    Block bounds are proven bounds of the block branch and bound, so the
    result stays valid when the blocks stop at ``rel_gap``.
    """
    t0 = time.perf_counter()
    constant = lagrangian_constant(model, multipliers)
    x = np.zeros(model.n_vars)
    results, models = [], []
    lb = float(constant)
    for k in range(partition.b):
        sub = build_block_subproblem(model, partition, k, multipliers)
        left = max(1.0, time_limit - (time.perf_counter() - t0))
        res = solve_misocp(sub, rel_gap_target=rel_gap, time_limit=left, options=options)
        if res.status == "infeasible":
            raise DecompositionError(f"block {k + 1} is infeasible, so the relaxed problem is infeasible")
        results.append(res)
        models.append(sub)
        lb += float(res.best_bound)
        if res.primal is not None:
            for j, jn in sub.meta["columns"].items():
                x[j] = res.primal[jn]
        else:
            x[:] = np.nan
    return lb, BlockSolutions(results, models, x, lb, constant)


def concatenated_u(model: ModelIR, x: np.ndarray) -> np.ndarray:
    inst = model.meta["instance"]
    n_gen, T = inst.network.n_gen, inst.horizon
    u = np.zeros((n_gen, T), dtype=int)
    for g in range(n_gen):
        for t in range(1, T + 1):
            u[g, t - 1] = int(round(x[model.var("u", g, t)]))
    return u


def restricted_fixings(u: np.ndarray) -> dict[tuple[int, int], int]:
    """Always-on units are fixed on, never-on units off, others only at their on periods."""
    fix: dict[tuple[int, int], int] = {}
    n_gen, T = u.shape
    for g in range(n_gen):
        if u[g].all():
            fix.update({(g, t): 1 for t in range(1, T + 1)})
        elif not u[g].any():
            fix.update({(g, t): 0 for t in range(1, T + 1)})
        else:
            fix.update({(g, t): 1 for t in range(1, T + 1) if u[g, t - 1]})
    return fix


def restricted_schedule(
    model: ModelIR,
    blocks: BlockSolutions,
    rel_gap: float = 0.01,
    time_limit: float = math.inf,
    options: ConicOptions | None = None,
) -> tuple[dict, MipResult, ModelIR]:
    """Solve the MISOCP with the commitments implied by the block solutions fixed."""
    if not np.all(np.isfinite(blocks.x)):
        raise DecompositionError("a block has no incumbent to restrict with")
    fix = restricted_fixings(concatenated_u(model, blocks.x))
    fixed = fix_binaries(model, partial=fix)
    res = solve_misocp(fixed, rel_gap_target=rel_gap, time_limit=time_limit, options=options)
    return fix, res, fixed


def subgradient_update(
    multipliers: MultiplierSet,
    model: ModelIR,
    x: np.ndarray,
    lb: float,
    best_ub: float,
    alpha: float,
) -> MultiplierSet:
    """Polyak step ``alpha * (best_ub - lb) / |g|^2`` along the relaxed-row violations ``g``."""
    if not math.isfinite(best_ub) or not multipliers.values or not np.all(np.isfinite(x)):
        return multipliers.copy()
    keys = list(multipliers.values)
    by_key = {row.key: row for row in model.rows if row.key in multipliers.values}
    grad = np.array([_sigma(by_key[k].sense) * (by_key[k].activity(x) - by_key[k].rhs) for k in keys])
    norm2 = float(grad @ grad)
    if norm2 == 0.0:
        return multipliers.copy()
    step = alpha * max(best_ub - lb, 0.0) / norm2
    out = multipliers.copy()
    for k, gk in zip(keys, grad):
        out.values[k] += step * gk
    return out.project()


@dataclass
class IterationRecord:
    iteration: int
    block_bounds: list[float]
    lb: float
    ub: float
    best_lb: float
    best_ub: float
    gap: float
    alpha: float


@dataclass
class DecompositionResult:
    status: str
    best_lb: float = -math.inf
    best_ub: float = math.inf
    schedule: CommitmentSchedule | None = None
    recovery: RecoveryOutcome | None = None
    iterations: list[IterationRecord] = field(default_factory=list)
    log: list[str] = field(default_factory=list)
    lb_time: float = 0.0
    ub_time: float = 0.0
    wall_time: float = 0.0
    n_blocks: int = 1
    model: ModelIR | None = field(default=None, repr=False)

    @property
    def gap(self) -> float:
        return relative_gap(self.best_ub, self.best_lb)


def run_decomposition(
    instance: UcInstance,
    b: int,
    max_iters: int = 5,
    gap_target: float = 0.01,
    cut_rounds: int = 5,
    sub_gap: float = 0.01,
    time_limit: float = 3600.0,
    alpha: float = 1.0,
    envelopes: bool = True,
    options: ConicOptions | None = None,
) -> DecompositionResult:
    """Cuts, multipliers from the relaxation duals, then up to ``max_iters`` rounds of
    block solves, restricted MISOCP, AC recovery and a subgradient step."""
    t0 = time.perf_counter()
    partition = BlockPartition.uniform(instance.horizon, b)
    out = DecompositionResult(status="no_upper_bound", n_blocks=b)

    def left() -> float:
        return max(1.0, time_limit - (time.perf_counter() - t0))

    model = build_misocp(instance)
    if envelopes:
        model = strengthen_model(model, rounds=cut_rounds).model
    out.model = model
    lam, _ = init_multipliers(model, partition, options)
    out.lb_time += time.perf_counter() - t0
    lb_prev = -math.inf
    for it in range(1, max_iters + 1):
        t_lb = time.perf_counter()
        lb, blocks = lagrangian_bound(model, partition, lam, sub_gap, left(), options)
        out.lb_time += time.perf_counter() - t_lb
        out.best_lb = max(out.best_lb, lb)

        t_ub = time.perf_counter()
        ub = math.inf
        try:
            _, res, fixed = restricted_schedule(model, blocks, sub_gap, left(), options)
        except (DecompositionError, MipError) as exc:
            log.info("iteration %d: no restricted schedule (%s)", it, exc)
            res = None
        if res is not None and res.schedule is not None:
            warm = ConicSolution(status=OPTIMAL, primal=res.primal, model=fixed)
            rec = recover_dispatch(instance, res.schedule, warm_start=warm)
            if rec.feasible and rec.dispatch.cost < out.best_ub:
                ub = rec.dispatch.cost
                out.best_ub = ub
                out.schedule = res.schedule
                out.recovery = rec
            elif rec.feasible:
                ub = rec.dispatch.cost
            elif out.recovery is None:
                out.recovery = rec
        out.ub_time += time.perf_counter() - t_ub

        gap = relative_gap(out.best_ub, out.best_lb)
        rec_line = IterationRecord(it, [r.best_bound for r in blocks.results], lb, ub,
                                   out.best_lb, out.best_ub, gap, alpha)
        out.iterations.append(rec_line)
        for k, r in enumerate(blocks.results):
            line = f"{it}, {k + 1}, {r.best_bound:.6f}, {out.best_lb:.6f}, {out.best_ub:.6f}, {gap:.6f}, {alpha:.6g}"
            out.log.append(line)
            log.info(line)
        if gap <= gap_target or time.perf_counter() - t0 >= time_limit:
            break
        if not math.isfinite(out.best_ub):
            alpha /= 2.0
            continue
        if lb <= lb_prev:
            alpha /= 2.0
        lb_prev = max(lb_prev, lb)
        lam = subgradient_update(lam, model, blocks.x, lb, out.best_ub, alpha)
    if math.isfinite(out.best_ub):
        out.status = "ok"
    elif out.recovery is not None:
        out.status = "local_inf"
    out.wall_time = time.perf_counter() - t0
    return out
