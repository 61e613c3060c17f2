"""Small hand-sized instances and a brute-force commitment oracle for tests."""

from __future__ import annotations

import itertools
import math

import numpy as np

from acuc.branch_and_bound import fix_binaries
from acuc.case_io import BranchRecord, BusRecord, GeneratorRecord, Network, branch_admittance, builtin_case
from acuc.conic_solver import solve_conic
from acuc.formulation import build_socp
from acuc.instance_gen import UcGeneratorParams, generate_instance, make_instance
from acuc.schedule import CommitmentSchedule

ADMITTANCE_NAMES = ("Gff", "Bff", "Gft", "Bft", "Gtf", "Btf", "Gtt", "Btt")


def line(f: int, t: int, r: float, x: float, b: float = 0.0, s_max: float = math.inf,
         angle: float = math.radians(30)) -> BranchRecord:
    blocks = branch_admittance(r, x, b, 1.0, 0.0)
    return BranchRecord(from_bus=f, to_bus=t, r=r, x=x, b_charge=b, tap=1.0, shift=0.0, s_max=s_max,
                        angle_min=-angle, angle_max=angle, **dict(zip(ADMITTANCE_NAMES, blocks)))


def bus(k: int, pd: float = 0.0, ref: bool = False) -> BusRecord:
    return BusRecord(id=k, type="ref" if ref else "PQ", pd=pd, qd=0.0, gs_shunt=0.0, bs_shunt=0.0, vmin=0.9, vmax=1.1)


def gen(b: int, pmax: float = 2.0, c1: float = 10.0, pmin: float = 0.0) -> GeneratorRecord:
    return GeneratorRecord(bus=b, pmin=pmin, pmax=pmax, qmin=-2.0, qmax=2.0, cost_quadratic=1.0, cost_linear=c1,
                           cost_constant=0.0)


def params(min_time: int = 1, fixed: float = 0.0, startup: float = 0.0, ramp: float = 10.0) -> UcGeneratorParams:
    return UcGeneratorParams(type=1, RU=ramp, RD=ramp, MinUp=min_time, MinDw=min_time, fixed_cost=fixed,
                             startup_cost=startup)


def desk_instance(seed: int, T: int = 4):
    """2 or 3 buses, 1 or 2 generators, ``T`` periods; costs make commitment matter."""
    rng = np.random.default_rng(seed)
    n_bus = int(rng.integers(2, 4))
    buses = tuple(
        BusRecord(id=k + 1, type="ref" if k == 0 else "PQ", pd=0.0, qd=0.0, gs_shunt=0.0, bs_shunt=0.0,
                  vmin=0.9, vmax=1.1)
        for k in range(n_bus)
    )
    branches = [line(k + 1, k + 2, float(rng.uniform(0.005, 0.02)), float(rng.uniform(0.02, 0.08)),
                     float(rng.uniform(0.0, 0.05))) for k in range(n_bus - 1)]
    if n_bus == 3 and rng.random() < 0.5:
        branches.append(line(1, 3, float(rng.uniform(0.005, 0.02)), float(rng.uniform(0.02, 0.08))))
    n_gen = int(rng.integers(1, 3))
    gens, params = [], []
    for g in range(n_gen):
        pmax = float(rng.uniform(0.8, 1.5))
        pmin = float(rng.uniform(0.0, 0.25)) * pmax
        c1 = float(rng.uniform(10.0, 40.0))
        gens.append(GeneratorRecord(bus=int(rng.integers(1, n_bus + 1)), pmin=pmin, pmax=pmax, qmin=-1.0, qmax=1.0,
                                    cost_quadratic=float(rng.uniform(0.0, 10.0)), cost_linear=c1,
                                    cost_constant=float(rng.uniform(0.0, 5.0))))
        min_time = int(rng.integers(1, 3))
        params.append(UcGeneratorParams(type=1, RU=max(pmin, pmax / 2), RD=max(pmin, pmax / 2), MinUp=min_time,
                                        MinDw=min_time, fixed_cost=float(rng.uniform(0.5, 5.0)) * c1 / 10,
                                        startup_cost=float(rng.uniform(1.0, 20.0)) * c1 / 10))
    net = Network(base_mva=100.0, buses=buses, branches=tuple(branches), generators=tuple(gens),
                  name=f"desk{seed}")
    cap = sum(g.pmax for g in gens)
    # above every minimum output so that no relaxation has to burn surplus power
    level = rng.uniform(0.3, 0.6, size=T) * cap
    share = rng.dirichlet(np.ones(n_bus))
    pd = np.outer(share, level)
    qd = 0.2 * pd
    return make_instance(net, pd, qd, params, name=net.name)


def short_instance(case: str, seed: int, T: int = 4):
    """First ``T`` periods of a generated instance, with minimum times clipped to ``T``."""
    full = generate_instance(builtin_case(case), seed=seed)
    params = []
    for par in full.gen_params:
        params.append(UcGeneratorParams(type=par.type, RU=par.RU, RD=par.RD, MinUp=min(par.MinUp, T - 1),
                                        MinDw=min(par.MinDw, T - 1), fixed_cost=par.fixed_cost,
                                        startup_cost=par.startup_cost, shutdown_cost=par.shutdown_cost))
    # peak hours keep the schedule non-trivial
    cols = slice(12, 12 + T)
    return make_instance(full.network, full.pd[:, cols], full.qd[:, cols], params, name=f"{case}-T{T}")


def logical_schedules(inst):
    """Every commitment pattern that satisfies the logical rows."""
    n_gen, T = inst.network.n_gen, inst.horizon
    for bits in itertools.product((0, 1), repeat=n_gen * T):
        sched = CommitmentSchedule.from_u(np.array(bits).reshape(n_gen, T))
        if sched.is_valid(inst):
            yield sched


def commitment_cost(inst, sched) -> float:
    """Fixed, startup and shutdown charges; the dispatch model already counts no-load cost."""
    total = 0.0
    for g, par in enumerate(inst.gen_params):
        total += par.fixed_cost * sched.u[g].sum() + par.startup_cost * sched.v[g].sum()
        total += par.shutdown_cost * sched.w[g].sum()
    return float(total)


def enumerate_optimum(inst):
    """Best objective over logical schedules, each dispatched with the SOCP relaxation."""
    best, best_sched = math.inf, None
    for sched in logical_schedules(inst):
        sol = solve_conic(build_socp(inst, sched))
        if not sol.ok:
            continue
        total = sol.objective + commitment_cost(inst, sched)
        if total < best:
            best, best_sched = total, sched
    return best, best_sched


def enumerate_model_optimum(model, inst):
    """Best objective of an integer model over logical schedules, by fixing each one."""
    best = math.inf
    for sched in logical_schedules(inst):
        sol = solve_conic(fix_binaries(model, sched))
        if sol.ok:
            best = min(best, sol.objective)
    return best


def _unit(b: int, c1: float, pmax: float = 2.0, qmin: float = -2.0, qmax: float = 2.0) -> GeneratorRecord:
    return GeneratorRecord(bus=b, pmin=0.0, pmax=pmax, qmin=qmin, qmax=qmax, cost_quadratic=1.0, cost_linear=c1,
                           cost_constant=0.0)


def dc_milp_infeasible(T: int = 2):
    """Lossy direct line that the DC model overloads: reactances alone send 2/3 of the load through it,
    while its resistance pushes the AC flow onto the two-line path."""
    buses = (bus(1, ref=True), bus(2), bus(3))
    lines = (line(1, 2, 0.0, 0.1), line(2, 3, 0.0, 0.1), line(1, 3, 0.3, 0.1, s_max=0.5))
    net = Network(base_mva=100.0, buses=buses, branches=lines, generators=(_unit(1, 10.0),), name="dc-overload")
    pd = np.zeros((3, T))
    pd[2] = 0.8
    return make_instance(net, pd, 0.1 * pd, [params(fixed=1.0)])


def dc_reactive_blind(T: int = 2):
    """The cheap remote unit cannot supply reactive power; only the local unit can hold the voltage."""
    buses = (bus(1, ref=True), bus(2))
    gens = (_unit(1, 10.0, qmin=0.0, qmax=0.0), _unit(2, 12.0))
    net = Network(base_mva=100.0, buses=buses, branches=(line(1, 2, 0.01, 0.1),), generators=gens,
                  name="dc-reactive")
    pd = np.zeros((2, T))
    pd[1] = 0.5
    qd = np.zeros((2, T))
    qd[1] = 0.6
    return make_instance(net, pd, qd, [params(fixed=5.0)] * 2)


def dc_loss_blind(T: int = 2):
    """The cheap unit sits behind a lossy line; paying for losses makes the local unit cheaper."""
    buses = (bus(1, ref=True), bus(2))
    gens = (_unit(1, 10.0), _unit(2, 11.0))
    net = Network(base_mva=100.0, buses=buses, branches=(line(1, 2, 0.3, 0.1),), generators=gens,
                  name="dc-losses")
    pd = np.zeros((2, T))
    pd[1] = 0.5
    return make_instance(net, pd, 0.2 * pd, [params(fixed=5.0)] * 2)
