"""End-to-end pipelines and their reports.

Each ``run_*`` function returns a :class:`SolveReport`. Lower bounds come
from convex relaxations, upper bounds only from dispatches that passed the
AC residual check.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, fields

from .branch_and_bound import INFEASIBLE, TIME_LIMIT, MipError, MipResult, solve_misocp
from .conic_solver import OPTIMAL, ConicOptions, ConicSolution
from .cuts import strengthen_model
from .feasibility import RecoveryOutcome, recover_dispatch
from .formulation import build_dc_uc, build_misocp
from .instance_gen import UcInstance
from .lagrangian import run_decomposition
from .model_ir import ModelIR

__all__ = [
    "RunOptions",
    "SolveReport",
    "compute_gap",
    "type_tag",
    "run_base",
    "run_enhanced",
    "run_dc",
    "run_decomp",
    "reports_to_csv",
    "format_table",
    "OUTCOMES",
]

OUTCOMES = ("ok", "dc_infeasible", "ac_recovery_infeasible", "local_inf", "time_limit", "infeasible")
TIMING_FIELDS = ("lbt_s", "ubt_s", "total_s")


@dataclass
class RunOptions:
    mip_gap: float = 1e-3
    time_limit: float = 3600.0
    cut_rounds: int = 5
    blocks: int = 4
    decomp_iters: int = 5
    decomp_gap: float = 0.01
    conic: ConicOptions | None = None


@dataclass
class SolveReport:
    mode: str
    instance: str
    type_tag: str
    lbt_s: float | None = None
    ubt_s: float | None = None
    total_s: float | None = None
    lb: float | None = None
    ub: float | None = None
    gap_pct: float | None = None
    outcome: str = "ok"
    b: int | None = None
    iterations: int | None = None

    def without_timing(self) -> dict:
        row = asdict(self)
        for key in TIMING_FIELDS:
            row.pop(key)
        return row


def compute_gap(lb: float, ub: float) -> float:
    """Optimality gap in percent, ``(ub - lb) / ub * 100``."""
    if not ub > 0:
        raise ValueError("the gap is undefined for a non-positive upper bound")
    return (ub - lb) / ub * 100.0


def type_tag(name: str) -> str:
    """Operating-condition tag carried in an instance name (``TYP`` when absent)."""
    upper = name.upper()
    for tag in ("API", "SAD", "TYP"):
        if upper.endswith(tag):
            return tag
    return "TYP"


def _report(mode: str, inst: UcInstance, **kw) -> SolveReport:
    rep = SolveReport(mode=mode, instance=inst.name or inst.network.name, type_tag=type_tag(inst.name), **kw)
    if rep.lb is not None and rep.ub is not None and math.isfinite(rep.lb) and math.isfinite(rep.ub):
        rep.gap_pct = compute_gap(rep.lb, rep.ub)
    return rep


def _recover(inst: UcInstance, mip: MipResult, model: ModelIR) -> RecoveryOutcome:
    warm = ConicSolution(status=OPTIMAL, primal=mip.primal, model=model)
    return recover_dispatch(inst, mip.schedule, warm_start=warm)


def _misocp_pipeline(mode: str, inst: UcInstance, model: ModelIR, opts: RunOptions, t0: float,
                     extra_lb_time: float = 0.0) -> SolveReport:
    left = max(1.0, opts.time_limit - (time.perf_counter() - t0))
    t_lb = time.perf_counter()
    try:
        mip = solve_misocp(model, rel_gap_target=opts.mip_gap, time_limit=left, options=opts.conic)
    except MipError:
        return _report(mode, inst, lbt_s=time.perf_counter() - t0, total_s=time.perf_counter() - t0,
                       outcome="local_inf")
    lbt = extra_lb_time + time.perf_counter() - t_lb
    lb = mip.best_bound if math.isfinite(mip.best_bound) else None
    if mip.status == INFEASIBLE:
        return _report(mode, inst, lbt_s=lbt, total_s=time.perf_counter() - t0, outcome="infeasible")
    if mip.schedule is None:
        return _report(mode, inst, lbt_s=lbt, total_s=time.perf_counter() - t0, lb=lb, outcome="time_limit")
    t_ub = time.perf_counter()
    rec = _recover(inst, mip, model)
    ubt = time.perf_counter() - t_ub
    outcome = "ok" if rec.feasible else "local_inf"
    if rec.feasible and mip.status == TIME_LIMIT:
        outcome = "time_limit"
    return _report(mode, inst, lbt_s=lbt, ubt_s=ubt, total_s=time.perf_counter() - t0, lb=lb,
                   ub=rec.dispatch.cost if rec.feasible else None, outcome=outcome)


def run_base(inst: UcInstance, opts: RunOptions | None = None) -> SolveReport:
    """MISOCP relaxation for the schedule and bound, then AC recovery for the upper bound."""
    opts = opts or RunOptions()
    t0 = time.perf_counter()
    return _misocp_pipeline("misocp", inst, build_misocp(inst), opts, t0)


def run_enhanced(inst: UcInstance, opts: RunOptions | None = None) -> SolveReport:
    """As :func:`run_base` after angle envelopes and rounds of cycle cuts."""
    opts = opts or RunOptions()
    t0 = time.perf_counter()
    strong = strengthen_model(build_misocp(inst), rounds=opts.cut_rounds, options=opts.conic)
    return _misocp_pipeline("misocp++", inst, strong.model, opts, t0, extra_lb_time=time.perf_counter() - t0)


def run_dc(inst: UcInstance, opts: RunOptions | None = None) -> SolveReport:
    """DC commitment, then AC recovery of its schedule. There is no valid AC lower bound."""
    opts = opts or RunOptions()
    t0 = time.perf_counter()
    try:
        mip = solve_misocp(build_dc_uc(inst), rel_gap_target=opts.mip_gap, time_limit=opts.time_limit,
                           options=opts.conic)
    except MipError:
        mip = MipResult(status=INFEASIBLE)
    lbt = time.perf_counter() - t0
    if mip.status == INFEASIBLE:
        return _report("dc", inst, lbt_s=lbt, total_s=lbt, outcome="dc_infeasible")
    if mip.schedule is None:
        return _report("dc", inst, lbt_s=lbt, total_s=lbt, outcome="time_limit")
    t_ub = time.perf_counter()
    rec = recover_dispatch(inst, mip.schedule)
    ubt = time.perf_counter() - t_ub
    if not rec.feasible:
        return _report("dc", inst, lbt_s=lbt, ubt_s=ubt, total_s=time.perf_counter() - t0,
                       outcome="ac_recovery_infeasible")
    return _report("dc", inst, lbt_s=lbt, ubt_s=ubt, total_s=time.perf_counter() - t0, ub=rec.dispatch.cost)


def run_decomp(inst: UcInstance, opts: RunOptions | None = None) -> SolveReport:
    """Temporal decomposition with ``opts.blocks`` blocks."""
    opts = opts or RunOptions()
    res = run_decomposition(inst, opts.blocks, max_iters=opts.decomp_iters, gap_target=opts.decomp_gap,
                            cut_rounds=opts.cut_rounds, time_limit=opts.time_limit, options=opts.conic)
    lb = res.best_lb if math.isfinite(res.best_lb) else None
    ub = res.best_ub if math.isfinite(res.best_ub) else None
    outcome = {"ok": "ok", "local_inf": "local_inf"}.get(res.status, "time_limit")
    return _report("decomp", inst, lbt_s=res.lb_time, ubt_s=res.ub_time, total_s=res.wall_time, lb=lb, ub=ub,
                   outcome=outcome, b=opts.blocks, iterations=len(res.iterations))


MODES = {"misocp": run_base, "misocp++": run_enhanced, "dc": run_dc, "decomp": run_decomp}


def reports_to_csv(reports: list[SolveReport]) -> str:
    """CSV with one column per report field; floats round-trip exactly, absent values are ``null``."""
    names = [f.name for f in fields(SolveReport)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for rep in reports:
        row = asdict(rep)
        writer.writerow(["null" if row[n] is None else (repr(float(row[n])) if isinstance(row[n], float) else row[n])
                         for n in names])
    return buf.getvalue()


def format_table(reports: list[SolveReport]) -> str:
    """Fixed-width table: instance, LB time, UB time, bounds, gap and outcome."""

    def num(v, spec):
        return format(v, spec) if v is not None else "-".rjust(int(spec.split(".")[0]))

    head = f"{'mode':<9} {'instance':<16} {'LBT':>8} {'UBT':>8} {'LB':>14} {'UB':>14} {'%Gap':>7}  outcome"
    lines = [head, "-" * len(head)]
    for r in reports:
        lines.append(f"{r.mode:<9} {r.instance:<16} {num(r.lbt_s, '8.1f')} {num(r.ubt_s, '8.1f')} "
                     f"{num(r.lb, '14.2f')} {num(r.ub, '14.2f')} {num(r.gap_pct, '7.2f')}  {r.outcome}")
    return "\n".join(lines)
