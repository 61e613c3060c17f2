"""Model builders for the multiperiod OPF and unit commitment problems.

Every builder returns a :class:`~acuc.model_ir.ModelIR` (or an
:class:`NlpModel` wrapping one). Rows carry keys whose first element is
the constraint label used throughout the package:

==========  ===========================================================
label       meaning
==========  ===========================================================
``2a``      quadratic cost epigraph ``c2 p^2 <= z``
``2b/2c``   active/reactive bus balance
``2d/2e``   reactive/active generation limits for a fixed schedule
``2f``      cyclic ramping (keys end in ``"up"``/``"dn"``, both ``<=``)
``2g-2j``   forward/backward active/reactive line flows
``2k/2l``   apparent-power limits at the from/to end
``2m/2n``   consistency rows (nonlinear, only in :class:`NlpModel`)
``3b``      rotated cone ``c^2 + s^2 <= c_ii c_jj``
``4a-4d``   DC cost epigraph, balance, flow definition, flow limits
``5a``      cost epigraph of the commitment models
``5b-5h``   logical, min-up/down and semicontinuous generation rows
==========  ===========================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instance_gen import UcInstance
from .model_ir import ModelIR
from .schedule import CommitmentSchedule

__all__ = [
    "NonlinearRow",
    "NlpModel",
    "build_mopf",
    "build_socp",
    "build_dc_mopf",
    "build_uc_minlp",
    "build_misocp",
    "build_dc_uc",
    "expected_tags",
    "cs_point",
]


@dataclass(frozen=True)
class NonlinearRow:
    """``2m``: c^2 + s^2 - c_ii c_jj = 0; ``2n``: s cos(dth) - c sin(dth) = 0, dth = th_j - th_i."""

    tag: str
    line: int
    t: int


@dataclass
class NlpModel:
    model: ModelIR
    nonlinear: list[NonlinearRow] = field(default_factory=list)

    def nonlinear_residuals(self, x) -> np.ndarray:
        m = self.model
        net = m.meta["network"]
        out = np.empty(len(self.nonlinear))
        for k, row in enumerate(self.nonlinear):
            br = net.branches[row.line]
            i, j = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
            c = x[m.var("c_ij", row.line, row.t)]
            s = x[m.var("s_ij", row.line, row.t)]
            if row.tag == "2m":
                out[k] = c * c + s * s - x[m.var("c_ii", i, row.t)] * x[m.var("c_ii", j, row.t)]
            else:
                d = x[m.var("theta", j, row.t)] - x[m.var("theta", i, row.t)]
                out[k] = s * math.cos(d) - c * math.sin(d)
        return out

    def relaxation(self) -> ModelIR:
        """Drop the nonlinear rows, relaxing every ``2m`` to the cone ``3b``."""
        out = self.model.copy()
        _add_conic_consistency(out, out.meta["network"], sorted({r.t for r in self.nonlinear}))
        return out

    def tags(self) -> set[str]:
        return self.model.tags() | {r.tag for r in self.nonlinear}


# --------------------------------------------------------------------------
# shared pieces


def _check_schedule(inst: UcInstance, schedule: CommitmentSchedule | None) -> np.ndarray:
    if schedule is None:
        return np.ones((inst.network.n_gen, inst.horizon), dtype=int)
    if schedule.shape != (inst.network.n_gen, inst.horizon):
        raise ValueError("schedule shape does not match the instance")
    return schedule.u


def _new_model(inst: UcInstance, name: str) -> ModelIR:
    m = ModelIR(name=name)
    m.meta.update(network=inst.network, horizon=inst.horizon, instance=inst)
    return m


def _add_ac_vars(m: ModelIR, inst: UcInstance, t: int, with_theta: bool) -> None:
    net = inst.network
    for k, bus in enumerate(net.buses):
        m.add_var("c_ii", (k, t), bus.vmin**2, bus.vmax**2)
    for l, br in enumerate(net.branches):
        vi = net.buses[net.bus_index[br.from_bus]].vmax
        vj = net.buses[net.bus_index[br.to_bus]].vmax
        cap = vi * vj
        c_lo = 0.0 if br.has_angle_bounds else -cap
        m.add_var("c_ij", (l, t), c_lo, cap)
        m.add_var("s_ij", (l, t), -cap, cap)
    if with_theta:
        _add_theta(m, inst, t)
    for l in range(net.n_branch):
        for kind in ("p_fwd", "p_bwd", "q_fwd", "q_bwd"):
            m.add_var(kind, (l, t))


def _add_theta(m: ModelIR, inst: UcInstance, t: int) -> None:
    ref = inst.network.ref_bus
    for k in range(inst.network.n_bus):
        if k == ref:
            m.add_var("theta", (k, t), 0.0, 0.0)
        else:
            m.add_var("theta", (k, t), -math.pi, math.pi)


def _add_gen_vars(m: ModelIR, inst: UcInstance, t: int, reactive: bool = True) -> None:
    for g, gen in enumerate(inst.network.generators):
        # generation is bounded by rows 2d/2e or 5g/5h; the box here only
        # keeps the relaxations bounded
        m.add_var("p_gen", (g, t), min(0.0, gen.pmin), max(0.0, gen.pmax))
        if reactive:
            m.add_var("q_gen", (g, t), min(0.0, gen.qmin), max(0.0, gen.qmax))


def _add_flow_rows(m: ModelIR, inst: UcInstance, t: int) -> None:
    net = inst.network
    for l, br in enumerate(net.branches):
        i, j = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
        cii, cjj = m.var("c_ii", i, t), m.var("c_ii", j, t)
        c, s = m.var("c_ij", l, t), m.var("s_ij", l, t)
        m.add_row({m.var("p_fwd", l, t): 1.0, cii: -br.Gff, c: -br.Gft, s: br.Bft}, "==", 0.0, ("2g", l, t))
        m.add_row({m.var("p_bwd", l, t): 1.0, cjj: -br.Gtt, c: -br.Gtf, s: -br.Btf}, "==", 0.0, ("2h", l, t))
        m.add_row({m.var("q_fwd", l, t): 1.0, cii: br.Bff, c: br.Bft, s: br.Gft}, "==", 0.0, ("2i", l, t))
        m.add_row({m.var("q_bwd", l, t): 1.0, cjj: br.Btt, c: br.Btf, s: -br.Gtf}, "==", 0.0, ("2j", l, t))
        if math.isfinite(br.s_max):
            m.add_soc(({}, br.s_max), [({m.var("p_fwd", l, t): 1.0}, 0.0), ({m.var("q_fwd", l, t): 1.0}, 0.0)], ("2k", l, t))
            m.add_soc(({}, br.s_max), [({m.var("p_bwd", l, t): 1.0}, 0.0), ({m.var("q_bwd", l, t): 1.0}, 0.0)], ("2l", l, t))


def _add_balance_rows(m: ModelIR, inst: UcInstance, t: int) -> None:
    net = inst.network
    for k, bus in enumerate(net.buses):
        prow: dict[int, float] = {}
        qrow: dict[int, float] = {}
        for g in net.gens_at(k):
            prow[m.var("p_gen", g, t)] = 1.0
            qrow[m.var("q_gen", g, t)] = 1.0
        cii = m.var("c_ii", k, t)
        prow[cii] = -bus.gs_shunt
        qrow[cii] = bus.bs_shunt
        for l in net.lines_from(k):
            prow[m.var("p_fwd", l, t)] = prow.get(m.var("p_fwd", l, t), 0.0) - 1.0
            qrow[m.var("q_fwd", l, t)] = qrow.get(m.var("q_fwd", l, t), 0.0) - 1.0
        for l in net.lines_to(k):
            prow[m.var("p_bwd", l, t)] = prow.get(m.var("p_bwd", l, t), 0.0) - 1.0
            qrow[m.var("q_bwd", l, t)] = qrow.get(m.var("q_bwd", l, t), 0.0) - 1.0
        m.add_row(prow, "==", inst.pd[k, t - 1], ("2b", k, t))
        m.add_row(qrow, "==", inst.qd[k, t - 1], ("2c", k, t))


def _add_conic_consistency(m: ModelIR, net, periods) -> None:
    for t in periods:
        for l, br in enumerate(net.branches):
            i, j = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
            m.add_rsoc(
                ({m.var("c_ii", i, t): 1.0}, 0.0),
                ({m.var("c_ii", j, t): 1.0}, 0.0),
                [({m.var("c_ij", l, t): 1.0}, 0.0), ({m.var("s_ij", l, t): 1.0}, 0.0)],
                ("3b", l, t),
            )


def _add_ramping(m: ModelIR, inst: UcInstance, tag: str = "2f") -> None:
    if inst.horizon < 2:
        return
    for g, par in enumerate(inst.gen_params):
        for t in inst.periods:
            p, pp = m.var("p_gen", g, t), m.var("p_gen", g, inst.prev(t))
            m.add_row({p: 1.0, pp: -1.0}, "<=", par.RU, (tag, g, t, "up"))
            m.add_row({p: -1.0, pp: 1.0}, "<=", par.RD, (tag, g, t, "dn"))


def _add_cost(m: ModelIR, inst: UcInstance, tag: str, commit: np.ndarray | None) -> None:
    """Generation cost; ``commit`` gives constant on/off values, else the ``u`` variables are used."""
    for t in inst.periods:
        for g, gen in enumerate(inst.network.generators):
            p = m.var("p_gen", g, t)
            if gen.cost_quadratic > 0:
                z = m.add_var("aux", ("cost", g, t), 0.0)
                m.add_rsoc(({z: 1.0}, 0.0), ({}, 1.0), [({p: math.sqrt(gen.cost_quadratic)}, 0.0)], (tag, g, t))
                m.add_objective(z, 1.0)
            if gen.cost_linear:
                m.add_objective(p, gen.cost_linear)
            if commit is None:
                m.add_objective(m.var("u", g, t), gen.cost_constant)
            else:
                m.objective_constant += gen.cost_constant * commit[g, t - 1]


def _add_fixed_gen_limits(m: ModelIR, inst: UcInstance, u: np.ndarray, reactive: bool = True) -> None:
    for t in inst.periods:
        for g, gen in enumerate(inst.network.generators):
            on = u[g, t - 1]
            p = m.var("p_gen", g, t)
            m.add_row({p: 1.0}, "<=", gen.pmax * on, ("2e", g, t, "hi"))
            m.add_row({p: 1.0}, ">=", gen.pmin * on, ("2e", g, t, "lo"))
            if reactive:
                q = m.var("q_gen", g, t)
                m.add_row({q: 1.0}, "<=", gen.qmax * on, ("2d", g, t, "hi"))
                m.add_row({q: 1.0}, ">=", gen.qmin * on, ("2d", g, t, "lo"))


def _add_commitment(m: ModelIR, inst: UcInstance, reactive: bool = True) -> None:
    net = inst.network
    for t in inst.periods:
        for g in range(net.n_gen):
            for kind in ("u", "v", "w"):
                m.add_var(kind, (g, t), 0.0, 1.0, binary=True)
    for g, par in enumerate(inst.gen_params):
        gen = net.generators[g]
        for t in inst.periods:
            u, v, w = m.var("u", g, t), m.var("v", g, t), m.var("w", g, t)
            up = m.var("u", g, inst.prev(t))
            # u_t - u_t' = v_t - w_t
            row: dict[int, float] = {up: -1.0}
            row[u] = row.get(u, 0.0) + 1.0
            row[v] = -1.0
            row[w] = 1.0
            m.add_row(row, "==", 0.0, ("5b", g, t))
            m.add_row({v: 1.0, u: -1.0}, "<=", 0.0, ("5c", g, t))
            m.add_row({w: 1.0, u: 1.0}, "<=", 1.0, ("5d", g, t))
            row = {}
            for tau in inst.uptime_window(g, t):
                j = m.var("v", g, tau)
                row[j] = row.get(j, 0.0) + 1.0
            row[u] = row.get(u, 0.0) - 1.0
            m.add_row(row, "<=", 0.0, ("5e", g, t))
            row = {}
            for tau in inst.downtime_window(g, t):
                j = m.var("w", g, tau)
                row[j] = row.get(j, 0.0) + 1.0
            row[u] = row.get(u, 0.0) + 1.0
            m.add_row(row, "<=", 1.0, ("5f", g, t))
            p = m.var("p_gen", g, t)
            m.add_row({p: 1.0, u: -gen.pmax}, "<=", 0.0, ("5g", g, t, "hi"))
            m.add_row({p: 1.0, u: -gen.pmin}, ">=", 0.0, ("5g", g, t, "lo"))
            if reactive:
                q = m.var("q_gen", g, t)
                m.add_row({q: 1.0, u: -gen.qmax}, "<=", 0.0, ("5h", g, t, "hi"))
                m.add_row({q: 1.0, u: -gen.qmin}, ">=", 0.0, ("5h", g, t, "lo"))
            m.add_objective(u, par.fixed_cost)
            m.add_objective(v, par.startup_cost)
            m.add_objective(w, par.shutdown_cost)


def _add_dc_network(m: ModelIR, inst: UcInstance, t: int) -> None:
    net = inst.network
    _add_theta(m, inst, t)
    for l, br in enumerate(net.branches):
        f = m.add_var("f_dc", (l, t))
        i, j = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
        b = 1.0 / (br.x * br.tap)
        m.add_row({f: 1.0, m.var("theta", i, t): -b, m.var("theta", j, t): b}, "==", -b * br.shift, ("4c", l, t))
        if math.isfinite(br.s_max):
            m.add_row({f: 1.0}, "<=", br.s_max, ("4d", l, t, "hi"))
            m.add_row({f: 1.0}, ">=", -br.s_max, ("4d", l, t, "lo"))
    for k in range(net.n_bus):
        row: dict[int, float] = {m.var("p_gen", g, t): 1.0 for g in net.gens_at(k)}
        for l in net.lines_from(k):
            row[m.var("f_dc", l, t)] = row.get(m.var("f_dc", l, t), 0.0) - 1.0
        for l in net.lines_to(k):
            row[m.var("f_dc", l, t)] = row.get(m.var("f_dc", l, t), 0.0) + 1.0
        m.add_row(row, "==", inst.pd[k, t - 1], ("4b", k, t))


# --------------------------------------------------------------------------
# builders


def _ac_core(inst: UcInstance, name: str, with_theta: bool) -> ModelIR:
    m = _new_model(inst, name)
    for t in inst.periods:
        _add_ac_vars(m, inst, t, with_theta)
        _add_gen_vars(m, inst, t)
    for t in inst.periods:
        _add_balance_rows(m, inst, t)
        _add_flow_rows(m, inst, t)
    return m


def _nonlinear_rows(inst: UcInstance) -> list[NonlinearRow]:
    rows = []
    for t in inst.periods:
        for l in range(inst.network.n_branch):
            rows.append(NonlinearRow("2m", l, t))
            rows.append(NonlinearRow("2n", l, t))
    return rows


def build_mopf(inst: UcInstance, schedule: CommitmentSchedule | None = None) -> NlpModel:
    """Multiperiod AC OPF for a fixed schedule (all units on by default)."""
    u = _check_schedule(inst, schedule)
    m = _ac_core(inst, "mopf", with_theta=True)
    _add_fixed_gen_limits(m, inst, u)
    _add_ramping(m, inst)
    _add_cost(m, inst, "2a", commit=u)
    return NlpModel(m, _nonlinear_rows(inst))


def build_socp(inst: UcInstance, schedule: CommitmentSchedule | None = None) -> ModelIR:
    u = _check_schedule(inst, schedule)
    m = _ac_core(inst, "socp", with_theta=False)
    _add_conic_consistency(m, inst.network, inst.periods)
    _add_fixed_gen_limits(m, inst, u)
    _add_ramping(m, inst)
    _add_cost(m, inst, "2a", commit=u)
    return m


def build_dc_mopf(inst: UcInstance, schedule: CommitmentSchedule | None = None) -> ModelIR:
    u = _check_schedule(inst, schedule)
    m = _new_model(inst, "dc-mopf")
    for t in inst.periods:
        _add_gen_vars(m, inst, t, reactive=False)
        _add_dc_network(m, inst, t)
    _add_fixed_gen_limits(m, inst, u, reactive=False)
    _add_ramping(m, inst)
    _add_cost(m, inst, "4a", commit=u)
    return m


def build_uc_minlp(inst: UcInstance) -> NlpModel:
    m = _ac_core(inst, "uc-minlp", with_theta=True)
    _add_commitment(m, inst)
    _add_ramping(m, inst)
    _add_cost(m, inst, "5a", commit=None)
    return NlpModel(m, _nonlinear_rows(inst))


def build_misocp(inst: UcInstance) -> ModelIR:
    m = _ac_core(inst, "misocp", with_theta=False)
    _add_conic_consistency(m, inst.network, inst.periods)
    _add_commitment(m, inst)
    _add_ramping(m, inst)
    _add_cost(m, inst, "5a", commit=None)
    return m


def build_dc_uc(inst: UcInstance) -> ModelIR:
    """DC commitment model: logical and generation rows plus DC network rows (no ramping)."""
    m = _new_model(inst, "dc-uc")
    for t in inst.periods:
        _add_gen_vars(m, inst, t, reactive=False)
        _add_dc_network(m, inst, t)
    _add_commitment(m, inst, reactive=False)
    _add_cost(m, inst, "5a", commit=None)
    return m


_NET = {"2b", "2c", "2g", "2h", "2i", "2j", "2k", "2l"}
_UC = {"5a", "5b", "5c", "5d", "5e", "5f", "5g", "5h"}


def expected_tags(builder: str) -> set[str]:
    """Constraint labels each builder emits on a network with rated lines and T >= 2."""
    return {
        "mopf": {"2a", "2d", "2e", "2f", "2m", "2n"} | _NET,
        "socp": {"2a", "2d", "2e", "2f", "3b"} | _NET,
        "dc_mopf": {"4a", "4b", "4c", "4d", "2e", "2f"},
        "uc_minlp": (_UC | _NET | {"2f", "2m", "2n"}),
        "misocp": (_UC | _NET | {"2f", "3b"}),
        "dc_uc": (_UC - {"5h"}) | {"4b", "4c", "4d"},
    }[builder]


def cs_point(model: ModelIR, vm: np.ndarray, va: np.ndarray, pg: np.ndarray, qg: np.ndarray | None = None,
             u: np.ndarray | None = None) -> np.ndarray:
    """Map a polar operating point ``(|V|, theta, p, q)`` into ``model``'s variable space.

    Arrays are ``(n_bus, T)`` for voltages and ``(n_gen, T)`` for generation.
    Flows and cost epigraphs are filled in from their defining equations;
    ``u`` (default all on) fills the commitment variables when present.
    """
    net = model.meta["network"]
    inst = model.meta["instance"]
    x = np.zeros(model.n_vars)
    T = inst.horizon
    u = np.ones((net.n_gen, T)) if u is None else np.asarray(u)
    for t in inst.periods:
        k = t - 1
        for b in range(net.n_bus):
            if model.has_var("c_ii", b, t):
                x[model.var("c_ii", b, t)] = vm[b, k] ** 2
            if model.has_var("theta", b, t):
                x[model.var("theta", b, t)] = va[b, k] - va[net.ref_bus, k]
        for l, br in enumerate(net.branches):
            i, j = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
            mag = vm[i, k] * vm[j, k]
            d = va[i, k] - va[j, k]
            c, s = mag * math.cos(d), -mag * math.sin(d)
            cii, cjj = vm[i, k] ** 2, vm[j, k] ** 2
            if model.has_var("c_ij", l, t):
                x[model.var("c_ij", l, t)] = c
                x[model.var("s_ij", l, t)] = s
                x[model.var("p_fwd", l, t)] = br.Gff * cii + br.Gft * c - br.Bft * s
                x[model.var("p_bwd", l, t)] = br.Gtt * cjj + br.Gtf * c + br.Btf * s
                x[model.var("q_fwd", l, t)] = -br.Bff * cii - br.Bft * c - br.Gft * s
                x[model.var("q_bwd", l, t)] = -br.Btt * cjj - br.Btf * c + br.Gtf * s
            if model.has_var("f_dc", l, t):
                x[model.var("f_dc", l, t)] = (d - br.shift) / (br.x * br.tap)
        for g, gen in enumerate(net.generators):
            x[model.var("p_gen", g, t)] = pg[g, k]
            if qg is not None and model.has_var("q_gen", g, t):
                x[model.var("q_gen", g, t)] = qg[g, k]
            if model.has_var("aux", "cost", g, t):
                x[model.var("aux", "cost", g, t)] = gen.cost_quadratic * pg[g, k] ** 2
    if model.has_var("u", 0, 1):
        sched = CommitmentSchedule.from_u(u)
        for g in range(net.n_gen):
            for t in inst.periods:
                x[model.var("u", g, t)] = sched.u[g, t - 1]
                x[model.var("v", g, t)] = sched.v[g, t - 1]
                x[model.var("w", g, t)] = sched.w[g, t - 1]
    return x
