import math

import numpy as np
import pytest
from desk import bus, desk_instance, enumerate_model_optimum, gen, params

from acuc.branch_and_bound import fix_binaries, solve_misocp
from acuc.case_io import Network
from acuc.conic_solver import solve_conic
from acuc.formulation import build_misocp
from acuc.instance_gen import generate_instance, make_instance
from acuc.case_io import builtin_case
from acuc.lagrangian import (
    BlockPartition,
    DecompositionError,
    MultiplierSet,
    build_block_subproblem,
    coupling_rows,
    init_multipliers,
    lagrangian_bound,
    restricted_fixings,
    run_decomposition,
    subgradient_update,
)
from acuc.model_ir import ModelIR


def test_uniform_partition():
    part = BlockPartition.uniform(24, 4)
    assert part.blocks[0] == tuple(range(1, 7))
    assert [part.first(k) for k in range(4)] == [1, 7, 13, 19]
    assert [part.last(k) for k in range(4)] == [6, 12, 18, 24]
    assert part.block_of(13) == 2
    with pytest.raises(ValueError):
        BlockPartition.uniform(24, 5)
    with pytest.raises(ValueError):
        BlockPartition(4, ((1, 3), (2, 4)))


def test_interfaces_and_classifier():
    inst = generate_instance(builtin_case("case9"), seed=1)
    part = BlockPartition.uniform(24, 4)
    g = next(i for i, p in enumerate(inst.gen_params) if p.MinUp >= 2)
    win = inst.uptime_window(g, 7)
    assert part.uptime_interface(inst, g, 7, 1) == [tau for tau in win if tau < 7]
    sets = part.classify(inst, g, 1)
    first_inside = 7 + inst.gen_params[g].MinUp - 1
    assert 7 in sets["r1"] and 7 in sets["r2"]
    assert first_inside not in sets["r1"] and first_inside not in sets["r2"]
    # periods of other blocks whose windows do not touch block 2 still reach outside it
    assert 3 in sets["r2"] and 3 not in sets["r1"]


@pytest.fixture(scope="module")
def nine_model():
    return build_misocp(generate_instance(builtin_case("case9"), seed=1))


def test_single_block_has_no_multipliers(nine_model):
    lam, sol = init_multipliers(nine_model, BlockPartition.uniform(24, 1))
    assert len(lam) == 0 and sol is None


def test_four_blocks_ramp_multipliers_at_block_starts(nine_model):
    part = BlockPartition.uniform(24, 4)
    lam, _ = init_multipliers(nine_model, part)
    for fam in ("ru", "rd", "log"):
        assert {t for (_, t) in lam.family(fam)} == {1, 7, 13, 19}
    assert lam.in_domain()
    for key in lam.free:
        assert key[0] == "5b"


def test_coupling_rows_unknown_family_rejected():
    inst = desk_instance(0)
    model = build_misocp(inst)
    j1, j2 = model.var("p_gen", 0, 1), model.var("p_gen", 0, 3)
    model.add_row({j1: 1.0, j2: 1.0}, "<=", 5.0, ("odd", 0))
    with pytest.raises(DecompositionError):
        coupling_rows(model, BlockPartition.uniform(4, 2))


def test_zero_multipliers_split_the_objective():
    inst = desk_instance(1)
    model = build_misocp(inst)
    part = BlockPartition.uniform(4, 2)
    lam, _ = init_multipliers(model, part)
    zero = MultiplierSet({k: 0.0 for k in lam.values}, lam.free)
    subs = [build_block_subproblem(model, part, k, zero) for k in range(2)]
    total = sum(len(s.objective) for s in subs)
    assert total == len(model.objective)
    for s in subs:
        cols = s.meta["columns"]
        for j, jn in cols.items():
            assert s.objective.get(jn, 0.0) == model.objective.get(j, 0.0)
    lb, _ = lagrangian_bound(model, part, zero, rel_gap=1e-6)
    full = solve_misocp(model, rel_gap_target=1e-6)
    assert lb <= full.incumbent_obj * (1 + 1e-6)


def test_single_block_equals_full_model():
    inst = desk_instance(2)
    model = build_misocp(inst)
    part = BlockPartition.uniform(4, 1)
    sub = build_block_subproblem(model, part, 0, MultiplierSet())
    assert sub.n_vars == model.n_vars and len(sub.rows) == len(model.rows)
    lb, _ = lagrangian_bound(model, part, MultiplierSet(), rel_gap=1e-6)
    assert lb == pytest.approx(solve_misocp(model, rel_gap_target=1e-6).best_bound, rel=1e-6)


def test_polyak_step_arithmetic():
    m = ModelIR()
    x = m.add_var("p_gen", (0, 1))
    key = ("2f", 0, 1, "up")
    m.add_row({x: 1.0}, "<=", 1.0, key)
    lam = MultiplierSet({key: 0.5})
    out = subgradient_update(lam, m, np.array([1.2]), lb=9.0, best_ub=10.0, alpha=1.0)
    assert out.values[key] - 0.5 == pytest.approx(5.0)


def test_sign_domain_and_fixed_point():
    m = ModelIR()
    x = m.add_var("p_gen", (0, 1))
    up, log_ = ("2f", 0, 1, "up"), ("5b", 0, 1)
    m.add_row({x: 1.0}, "<=", 1.0, up)
    m.add_row({x: 1.0}, "==", 0.5, log_)
    lam = MultiplierSet({up: 0.1, log_: 0.0}, frozenset({log_}))
    # slack inequality pulls its multiplier to zero, the equality may go negative
    out = subgradient_update(lam, m, np.array([0.0]), lb=0.0, best_ub=1.0, alpha=1.0)
    assert out.values[up] == 0.0 and out.values[log_] < 0.0
    assert out.in_domain()
    # satisfied rows give a zero subgradient: nothing moves
    m2 = ModelIR()
    y = m2.add_var("p_gen", (0, 1))
    m2.add_row({y: 1.0}, "==", 0.5, log_)
    same = subgradient_update(MultiplierSet({log_: 0.3}, frozenset({log_})), m2, np.array([0.5]), 0.0, 1.0, 1.0)
    assert same.values[log_] == 0.3


def test_update_skipped_without_upper_bound():
    lam = MultiplierSet({("2f", 0, 1, "up"): 0.5})
    out = subgradient_update(lam, ModelIR(), np.zeros(0), 0.0, math.inf, 1.0)
    assert out.values == lam.values


def test_restricted_fixings_rules():
    u = np.array([[1, 1, 1, 1], [0, 0, 0, 0], [1, 1, 0, 0]])
    fix = restricted_fixings(u)
    assert all(fix[(0, t)] == 1 for t in range(1, 5))
    assert all(fix[(1, t)] == 0 for t in range(1, 5))
    assert fix[(2, 1)] == 1 and fix[(2, 2)] == 1
    assert (2, 3) not in fix and (2, 4) not in fix


def test_seam_violation_is_repaired():
    # a unit with a 3-period minimum uptime switched on only in the last period
    net = Network(base_mva=100.0, buses=(bus(1, ref=True),), branches=(), generators=(gen(1), gen(1, c1=30.0)),
                  name="seam")
    inst = make_instance(net, np.full((1, 4), 0.5), np.zeros((1, 4)), [params(3, 1.0, 1.0)] * 2)
    u = np.array([[0, 0, 0, 1], [1, 1, 1, 1]])
    model = build_misocp(inst)
    res = solve_misocp(fix_binaries(model, partial=restricted_fixings(u)), rel_gap_target=1e-6)
    sched = res.schedule
    assert sched.is_valid(inst)
    assert sched.u[0, 3] == 1 and sched.u[0].sum() >= 3


@pytest.mark.parametrize("seed", [0, 3])
def test_decomposition_brackets_model_optimum(seed):
    inst = desk_instance(seed)
    res = run_decomposition(inst, 2, max_iters=3, cut_rounds=2)
    assert res.status == "ok"
    opt = enumerate_model_optimum(res.model, inst)
    assert res.best_lb <= opt * (1 + 1e-6)
    assert opt <= res.best_ub * (1 + 1e-6)
    lbs = [r.best_lb for r in res.iterations]
    ubs = [r.best_ub for r in res.iterations]
    assert lbs == sorted(lbs) and ubs == sorted(ubs, reverse=True)
    assert all(len(line.split(", ")) == 7 for line in res.log)
