import math

import numpy as np
import pytest
from desk import bus, desk_instance, gen, line, params, short_instance

from acuc.branch_and_bound import solve_misocp
from acuc.case_io import GeneratorRecord, Network
from acuc.conic_solver import OPTIMAL, ConicSolution
from acuc.feasibility import (
    FEAS_TOL,
    evaluate_residuals,
    max_residual,
    recover_dispatch,
    schedule_cost,
    write_dispatch,
)
from acuc.formulation import build_misocp
from acuc.instance_gen import make_instance
from acuc.schedule import CommitmentSchedule, ScheduleError


def two_bus(pd, qd, x=0.1):
    net = Network(base_mva=100.0, buses=(bus(1, ref=True), bus(2)), branches=(line(1, 2, 0.0, x),),
                  generators=(gen(1),), name="two")
    return make_instance(net, np.array([[0.0], [pd]]), np.array([[0.0], [qd]]), [params()])


def test_hand_solved_two_bus_flow():
    # lossless line, |V1| = 1 at angle 0, |V2| = 0.98 lagging by delta
    x, v2, delta = 0.1, 0.98, 0.1
    pd = v2 * math.sin(delta) / x
    qd = (v2 * math.cos(delta) - v2 * v2) / x
    pg = pd
    qg = (1.0 - v2 * math.cos(delta)) / x
    inst = two_bus(pd, qd, x)
    sched = CommitmentSchedule.all_on(1, 1)
    res = evaluate_residuals(inst, sched, [[1.0], [v2]], [[0.0], [-delta]], [[pg]], [[qg]])
    assert max_residual(res) <= 1e-12


def test_zero_point_balance_residual_is_demand():
    inst = two_bus(0.7, 0.2)
    res = evaluate_residuals(inst, CommitmentSchedule.all_on(1, 1), np.ones((2, 1)), np.zeros((2, 1)),
                             np.zeros((1, 1)), np.zeros((1, 1)))
    assert res["2b"] == pytest.approx(0.7)
    assert res["2c"] == pytest.approx(0.2)


def test_residual_is_continuous_in_angle():
    x, v2, delta = 0.1, 0.98, 0.1
    pd = v2 * math.sin(delta) / x
    qd = (v2 * math.cos(delta) - v2 * v2) / x
    qg = (1.0 - v2 * math.cos(delta)) / x
    inst = two_bus(pd, qd, x)
    sched = CommitmentSchedule.all_on(1, 1)
    prev = 0.0
    for eps in (1e-6, 1e-5, 1e-4, 1e-3):
        r = max_residual(evaluate_residuals(inst, sched, [[1.0], [v2]], [[0.0], [-delta + eps]], [[pd]], [[qg]]))
        assert prev <= r <= 20 * eps
        prev = r


def test_angle_wrap_does_not_flag_full_turns():
    inst = two_bus(0.0, 0.0)
    sched = CommitmentSchedule.all_on(1, 1)
    res = evaluate_residuals(inst, sched, np.ones((2, 1)), [[0.0], [2 * math.pi]], np.zeros((1, 1)),
                             np.zeros((1, 1)))
    assert res["angle"] == pytest.approx(0.0, abs=1e-12)


def single_bus_day(pd=0.5):
    g = GeneratorRecord(bus=1, pmin=0.0, pmax=1.0, qmin=-1.0, qmax=1.0, cost_quadratic=2.0, cost_linear=10.0,
                        cost_constant=1.0)
    net = Network(base_mva=100.0, buses=(bus(1, ref=True),), branches=(), generators=(g,), name="one")
    return make_instance(net, np.full((1, 24), pd), np.zeros((1, 24)), [params(fixed=3.0, startup=50.0)])


def test_single_bus_dispatch_and_cost():
    inst = single_bus_day()
    out = recover_dispatch(inst, CommitmentSchedule.all_on(1, 24))
    assert out.feasible
    assert np.allclose(out.dispatch.pg, 0.5, atol=1e-6)
    per_period = 1.0 + 10.0 * 0.5 + 2.0 * 0.25
    assert out.dispatch.cost == pytest.approx(24 * per_period + 24 * 3.0, rel=1e-7)


def test_capacity_shortfall_is_local_infeasible():
    out = recover_dispatch(single_bus_day(pd=1.4), CommitmentSchedule.all_on(1, 24))
    assert not out.feasible
    assert out.status == "local_infeasible"
    assert out.max_residual > FEAS_TOL


def test_invalid_schedule_rejected():
    inst = desk_instance(0)
    u = np.ones((inst.network.n_gen, inst.horizon), int)
    bad = CommitmentSchedule(u=u, v=np.ones_like(u), w=np.zeros_like(u))
    with pytest.raises(ScheduleError):
        recover_dispatch(inst, bad)


@pytest.mark.parametrize("seed", range(5))
def test_reported_dispatch_passes_oracle(seed):
    inst = desk_instance(seed)
    sched = CommitmentSchedule.all_on(inst.network.n_gen, inst.horizon)
    out = recover_dispatch(inst, sched)
    assert out.feasible
    d = out.dispatch
    assert max_residual(evaluate_residuals(inst, sched, d.vm, d.va, d.pg, d.qg)) <= FEAS_TOL
    assert d.cost == pytest.approx(schedule_cost(inst, sched, d.pg), rel=1e-12)


def test_warm_start_from_relaxation_is_bounded_below():
    inst = short_instance("case9", seed=1)
    model = build_misocp(inst)
    mip = solve_misocp(model, rel_gap_target=1e-4)
    warm = ConicSolution(status=OPTIMAL, primal=mip.primal, model=model)
    out = recover_dispatch(inst, mip.schedule, warm_start=warm)
    assert out.feasible
    lb = mip.best_bound
    assert lb * (1 - 1e-6) <= out.dispatch.cost <= 1.02 * lb
    assert out.attempts[0].startswith("warm")


def test_dispatch_dump(tmp_path):
    inst = desk_instance(2)
    out = recover_dispatch(inst, CommitmentSchedule.all_on(inst.network.n_gen, inst.horizon))
    path = tmp_path / "dispatch.txt"
    write_dispatch(out.dispatch, path)
    lines = path.read_text().splitlines()
    assert "t bus vm va" in lines and "t gen p q" in lines
    n_rows = inst.horizon * (inst.network.n_bus + inst.network.n_gen)
    assert sum(1 for s in lines if s and s[0].isdigit()) == n_rows
