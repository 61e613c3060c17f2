import math

import numpy as np
import pytest
from desk import bus, desk_instance, enumerate_optimum, gen, params

from acuc.branch_and_bound import (
    INFEASIBLE,
    FixingError,
    extract_schedule,
    fix_binaries,
    relative_gap,
    repair_commitment,
    solve_misocp,
)
from acuc.case_io import Network
from acuc.conic_solver import solve_conic
from acuc.formulation import build_misocp
from acuc.instance_gen import make_instance
from acuc.schedule import CommitmentSchedule


def single_bus(pd_series, n_gen=1, min_time=1, pmin=0.0, fixed=0.0, startup=0.0):
    T = len(pd_series)
    gens = tuple(gen(1, pmax=1.0, c1=10.0 + g, pmin=pmin) for g in range(n_gen))
    net = Network(base_mva=100.0, buses=(bus(1, ref=True),), branches=(), generators=gens, name="single")
    pd = np.array([pd_series], dtype=float)
    return make_instance(net, pd, np.zeros((1, T)), [params(min_time, fixed, startup)] * n_gen)


@pytest.mark.parametrize("seed", range(6))
def test_matches_enumeration(seed):
    inst = desk_instance(seed)
    best, _ = enumerate_optimum(inst)
    res = solve_misocp(build_misocp(inst), rel_gap_target=1e-9)
    assert res.incumbent_obj == pytest.approx(best, rel=1e-6)
    assert res.best_bound <= res.incumbent_obj + 1e-9 * abs(res.incumbent_obj) + 1e-9
    assert res.schedule.is_valid(inst)


@pytest.mark.parametrize("seed", range(3))
def test_bound_trace_non_decreasing(seed):
    res = solve_misocp(build_misocp(desk_instance(seed)), rel_gap_target=1e-9)
    trace = res.bound_trace
    assert trace
    assert all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(trace, trace[1:]))


def test_demand_forces_commitment():
    inst = single_bus([0.5, 0.5], fixed=1.0)
    res = solve_misocp(build_misocp(inst))
    assert res.schedule.u.tolist() == [[1, 1]]
    assert res.schedule.v.sum() == 0 and res.schedule.w.sum() == 0


def test_fully_fixed_model_is_solved_at_the_root():
    inst = desk_instance(0)
    model = build_misocp(inst)
    sched = CommitmentSchedule.all_on(inst.network.n_gen, inst.horizon)
    fixed = fix_binaries(model, sched)
    lo, hi = fixed.bounds()
    assert all(lo[j] == hi[j] for j in fixed.binaries())
    res = solve_misocp(fixed)
    assert res.node_count == 1
    assert res.incumbent_obj == pytest.approx(solve_conic(fixed).objective, rel=1e-6)


def test_partial_fixing_leaves_other_periods_free():
    inst = desk_instance(0)
    fixed = fix_binaries(build_misocp(inst), partial={(0, 3): 1, (0, 4): 1})
    lo, hi = fixed.bounds()
    for t in inst.periods:
        j = fixed.var("u", 0, t)
        assert (lo[j], hi[j]) == ((1.0, 1.0) if t in (3, 4) else (0.0, 1.0))


def test_fixed_off_generator_produces_nothing():
    inst = single_bus([0.5, 0.5, 0.5, 0.5], n_gen=2)
    model = fix_binaries(build_misocp(inst), partial={(1, t): 0 for t in range(1, 5)})
    sol = solve_conic(model.relaxed())
    for t in range(1, 5):
        assert abs(sol.primal[model.var("p_gen", 1, t)]) < 1e-6
        assert abs(sol.primal[model.var("q_gen", 1, t)]) < 1e-6


def test_contradictory_fixings_rejected():
    model = build_misocp(desk_instance(0))
    with pytest.raises(FixingError):
        fix_binaries(model, partial={(0, 2): 0, ("v", 0, 2): 1})
    with pytest.raises(FixingError):
        fix_binaries(model, partial={(0, 2): 1, ("w", 0, 2): 1})
    with pytest.raises(FixingError):
        fix_binaries(model, partial={(0, 2): 2})
    with pytest.raises(FixingError):
        fix_binaries(model, partial={(7, 2): 1})


def test_infeasible_model_reported():
    inst = single_bus([1.5, 1.5])
    assert solve_misocp(build_misocp(inst)).status == INFEASIBLE


def test_min_uptime_respected_in_optimum():
    # cheap to turn off in the valley, but a 3-period minimum uptime keeps the unit on
    inst = single_bus([0.6, 0.0, 0.6, 0.6], n_gen=1, min_time=3, pmin=0.0, fixed=5.0)
    res = solve_misocp(build_misocp(inst), rel_gap_target=1e-9)
    assert res.schedule.is_valid(inst)


def test_gap_target_validated():
    with pytest.raises(ValueError):
        solve_misocp(build_misocp(desk_instance(0)), rel_gap_target=0.0)


def test_relative_gap():
    assert relative_gap(100.0, 99.0) == pytest.approx(0.01)
    assert relative_gap(100.0, 101.0) == 0.0
    assert relative_gap(math.inf, 1.0) == math.inf


def test_extract_and_repair():
    inst = desk_instance(4)
    model = build_misocp(inst)
    res = solve_misocp(model)
    assert extract_schedule(model, res.primal) == res.schedule
    u = np.zeros((inst.network.n_gen, inst.horizon))
    u[0, 1] = 1
    fixed = repair_commitment(u, inst)
    assert fixed.is_valid(inst)
    assert np.all(fixed.u >= u)
