import math

import numpy as np
import pytest
from desk import bus, desk_instance, gen, line, params

from acuc.case_io import Network, builtin_case, with_angle_limits
from acuc.conic_solver import solve_conic
from acuc.cuts import (
    ARCTANGENT,
    SDP,
    add_envelopes,
    arctangent_envelopes,
    cut_loop,
    cycle_basis,
    separate_cycle,
    strengthen_model,
)
from acuc.formulation import build_misocp, build_socp, cs_point
from acuc.instance_gen import generate_instance, make_instance


def triangle(angle=math.radians(30)):
    buses = (bus(1, ref=True), bus(2, pd=0.4), bus(3, pd=0.4))
    lines = (line(1, 2, 0.01, 0.05, angle=angle), line(2, 3, 0.01, 0.05, angle=angle),
             line(3, 1, 0.01, 0.05, angle=angle))
    net = Network(base_mva=100.0, buses=buses, branches=lines, generators=(gen(1),), name="tri")
    pd = np.array([[0.0], [0.4], [0.4]])
    return make_instance(net, pd, 0.1 * pd, [params()])


def path_network():
    buses = (bus(1, ref=True), bus(2), bus(3))
    return Network(base_mva=100.0, buses=buses, branches=(line(1, 2, 0.0, 0.1), line(2, 3, 0.0, 0.1)),
                   generators=(gen(1),), name="path")


def test_basis_sizes():
    assert len(cycle_basis(path_network())) == 0
    assert len(cycle_basis(triangle().network)) == 1
    assert len(cycle_basis(builtin_case("case9"))) == 1
    for name in ("case14", "case30", "case57"):
        net = builtin_case(name)
        assert len(cycle_basis(net)) == net.n_branch - net.n_bus + 1


@pytest.mark.parametrize("name", ["case9", "case14", "case30"])
def test_cycles_use_existing_lines_and_close(name):
    net = builtin_case(name)
    basis = cycle_basis(net)
    for buses, edges in zip(basis.cycles, basis.edges):
        assert len(buses) == len(edges) == len(set(buses))
        for k, (l, forward) in enumerate(edges):
            br = net.branches[l]
            a, b = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
            if not forward:
                a, b = b, a
            assert (a, b) == (buses[k], buses[(k + 1) % len(buses)])


def _envelope_model(inst):
    model, _ = add_envelopes(build_socp(inst))
    return model


def _cut_value(cut, x):
    return cut.activity(x) - cut.rhs


def test_sector_example():
    inst = triangle(angle=math.pi / 4)
    model = _envelope_model(inst)
    cuts = arctangent_envelopes(model, 0, 1)
    sector = [c for c in cuts if c.label[1] == "sector" and c.label[2] == "+"][0]
    x = np.zeros(model.n_vars)
    x[model.var("c_ij", 0, 1)] = 1.0
    x[model.var("s_ij", 0, 1)] = 1.2
    assert _cut_value(sector, x) == pytest.approx(0.2)
    x[model.var("s_ij", 0, 1)] = 0.9
    assert _cut_value(sector, x) < 0


def test_tangent_tight_at_anchor():
    inst = triangle()
    model = _envelope_model(inst)
    rmax = 1.1 * 1.1
    x = np.zeros(model.n_vars)
    x[model.var("c_ij", 0, 1)] = rmax
    anchor = [c for c in arctangent_envelopes(model, 0, 1, K=3) if c.label[1] == "tangent" and c.label[2] == 0.0]
    assert len(anchor) == 2
    for cut in anchor:
        assert _cut_value(cut, x) == pytest.approx(0.0, abs=1e-9)


def test_no_envelopes_without_usable_angle_bound():
    inst = triangle(angle=math.pi / 2)
    assert arctangent_envelopes(_envelope_model(inst), 0, 1) == []


def _random_points(inst, model, rng, n):
    net = inst.network
    for _ in range(n):
        vm = np.array([[rng.uniform(b.vmin, b.vmax)] * inst.horizon for b in net.buses])
        va = np.zeros((net.n_bus, inst.horizon))
        # random angles along a spanning tree keep every tree line within its bound
        for _attempt in range(200):
            va = rng.uniform(-0.6, 0.6, size=(net.n_bus, inst.horizon))
            ok = True
            for br in net.branches:
                d = va[net.bus_index[br.from_bus]] - va[net.bus_index[br.to_bus]]
                ok &= bool(np.all((br.angle_min <= d) & (d <= br.angle_max)))
            if ok:
                break
        else:
            continue
        pg = np.zeros((net.n_gen, inst.horizon))
        yield cs_point(model, vm, va, pg)


def test_envelopes_hold_on_sampled_points():
    inst = triangle()
    model, cuts = add_envelopes(build_socp(inst))
    rng = np.random.default_rng(0)
    count = 0
    for x in _random_points(inst, model, rng, 300):
        count += 1
        assert max(_cut_value(c, x) for c in cuts) <= 1e-7
    assert count > 100


def _cycle_point(model, angles, mags=(1.0, 1.0, 1.0)):
    x = np.zeros(model.n_vars)
    for k in range(3):
        x[model.var("c_ii", k, 1)] = mags[k] ** 2
    for l, d in enumerate(angles):
        r = mags[l] * mags[(l + 1) % 3]
        x[model.var("c_ij", l, 1)] = r * math.cos(d)
        x[model.var("s_ij", l, 1)] = -r * math.sin(d)
    return x


def test_inconsistent_cycle_is_separated():
    model = build_socp(triangle())
    basis = cycle_basis(model.meta["network"])
    x = _cycle_point(model, (math.pi / 3,) * 3)
    cut = separate_cycle(model, basis, 0, 1, x)
    assert cut is not None and cut.origin == SDP
    assert cut.violation_at(x) > 1e-3
    # angles summing to zero around the cycle come from real voltages
    for angles in ((0.2, -0.1, -0.1), (0.0, 0.0, 0.0)):
        good = _cycle_point(model, angles, mags=(1.05, 0.95, 1.0))
        assert separate_cycle(model, basis, 0, 1, good) is None
        assert cut.violation_at(good) <= 1e-7


def test_separation_is_scale_invariant_on_consistent_points():
    model = build_socp(triangle())
    basis = cycle_basis(model.meta["network"])
    x = 2.0 * _cycle_point(model, (0.2, -0.1, -0.1))
    assert separate_cycle(model, basis, 0, 1, x) is None


def test_separated_cut_excludes_the_point_after_resolve():
    model = build_socp(triangle())
    basis = cycle_basis(model.meta["network"])
    x = _cycle_point(model, (math.pi / 3,) * 3)
    cut = separate_cycle(model, basis, 0, 1, x)
    again = model.copy()
    again.add_row(cut.coeffs, "<=", cut.rhs, cut.key)
    assert separate_cycle(again, basis, 0, 1, x).violation_at(x) == pytest.approx(cut.violation_at(x), rel=1e-4)


def test_radial_loop_has_single_bound():
    inst = desk_instance(0)
    assert len(cycle_basis(inst.network)) == 0
    res = cut_loop(_envelope_model(inst), cycle_basis(inst.network))
    assert res.cuts == [] and len(res.lb_trace) == 1


@pytest.fixture(scope="module")
def nine_loop():
    inst = generate_instance(builtin_case("case9"), seed=1)
    model = build_misocp(inst)
    strong = strengthen_model(model, rounds=5)
    return inst, model, strong


def test_nine_bus_trace(nine_loop):
    inst, model, strong = nine_loop
    trace = strong.loop.lb_trace
    assert all(b >= a - 1e-7 for a, b in zip(trace, trace[1:]))
    plain = solve_conic(model.relaxed()).objective
    assert trace[0] >= plain - 1e-6 * abs(plain)


def test_nine_bus_cuts_valid_on_samples(nine_loop):
    inst, _, strong = nine_loop
    model = strong.model
    rng = np.random.default_rng(1)
    assert {c.origin for c in strong.envelopes} == {ARCTANGENT}
    for x in _random_points(inst, model, rng, 50):
        worst = max(_cut_value(c, x) for c in strong.cuts)
        assert worst <= 1e-7


def test_tighter_angle_limit_shrinks_sector():
    net = with_angle_limits(builtin_case("case9"), math.radians(10))
    assert all(br.angle_bound <= math.radians(10) + 1e-12 for br in net.branches)
