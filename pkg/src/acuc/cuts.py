"""Valid linear inequalities that tighten the conic relaxation.

Two families are generated, both per line (or per cycle) and per period:

* arctangent envelopes couple the bus angles ``theta`` with ``(c_ij, s_ij)``
  through sector cuts and tangent-plane cuts of ``dth = atan2(-s, c)``;
* cycle cuts come from projecting the relaxation point of a cycle onto the
  set of partial Hermitian matrices that have a PSD completion; the
  supporting hyperplane at the projection separates the point.

Cuts are valid for every point built from voltages whose magnitudes and
angle differences lie within the network bounds.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .case_io import BranchRecord, Network
from .conic_solver import ConicOptions, solve_conic, solve_small_psd
from .model_ir import ModelIR

__all__ = [
    "LinearCut",
    "CycleBasis",
    "CutLoopResult",
    "cycle_basis",
    "arctangent_envelopes",
    "add_envelopes",
    "separate_cycle",
    "cut_loop",
    "write_cut_dump",
    "Strengthened",
    "strengthen_model",
]

log = logging.getLogger(__name__)

ARCTANGENT = "arctangent"
SDP = "sdp_separation"


@dataclass
class LinearCut:
    """``sum(coeffs[j] * x[j]) <= rhs`` over model columns."""

    coeffs: dict[int, float]
    rhs: float
    origin: str
    period: int
    violation: float = 0.0
    sense: str = "<="
    label: tuple = ()

    @property
    def key(self) -> tuple:
        return ("cut", self.origin, self.period, *self.label)

    def activity(self, x) -> float:
        return sum(c * x[j] for j, c in self.coeffs.items())

    def violation_at(self, x) -> float:
        return self.activity(x) - self.rhs


@dataclass(frozen=True)
class CycleBasis:
    """Fundamental cycles; ``edges[k]`` lists ``(line, forward)`` along ``cycles[k]``.

    ``cycles[k]`` is the bus-position sequence visited by the cycle and
    ``forward`` tells whether the line is walked from its from-bus to its
    to-bus. Parallel lines yield cycles of length two.
    """

    cycles: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[tuple[int, bool], ...], ...]

    def __len__(self) -> int:
        return len(self.cycles)


def cycle_basis(net: Network) -> CycleBasis:
    """Fundamental cycles of a breadth-first spanning tree rooted at the reference bus."""
    ends = [(net.bus_index[b.from_bus], net.bus_index[b.to_bus]) for b in net.branches]
    incident: list[list[int]] = [[] for _ in range(net.n_bus)]
    for l, (i, j) in enumerate(ends):
        incident[i].append(l)
        incident[j].append(l)
    root = net.ref_bus
    parent = {root: (None, None)}  # bus -> (parent bus, line)
    depth = {root: 0}
    tree = set()
    queue = deque([root])
    while queue:
        k = queue.popleft()
        for l in incident[k]:
            i, j = ends[l]
            other = j if i == k else i
            if other not in parent:
                parent[other] = (k, l)
                depth[other] = depth[k] + 1
                tree.add(l)
                queue.append(other)

    cycles, edges = [], []
    for l, (i, j) in enumerate(ends):
        if l in tree or i not in parent or j not in parent:
            continue
        # walk both ends up to their common ancestor
        left, right = [i], [j]
        left_e, right_e = [], []
        a, b = i, j
        while a != b:
            if depth[a] >= depth[b]:
                pa, la = parent[a]
                left_e.append(la)
                a = pa
                left.append(a)
            else:
                pb, lb = parent[b]
                right_e.append(lb)
                b = pb
                right.append(b)
        # cycle: i -> ... -> ancestor -> ... -> j -> i (closing line)
        buses = left + right[-2::-1]
        path_lines = left_e + right_e[::-1]
        seq = []
        for k, line in enumerate(path_lines):
            seq.append((line, ends[line][0] == buses[k]))
        seq.append((l, ends[l][0] == j))
        cycles.append(tuple(buses))
        edges.append(tuple(seq))
    return CycleBasis(tuple(cycles), tuple(edges))


# --------------------------------------------------------------------------
# arctangent envelopes


def _max_on_arc(m: float, sign: float, r: float, rmax: float, lo: float, hi: float) -> float:
    """max over y in [lo, hi] of sign*m*rmax*y - sign*m*r*sin(y) + r*cos(y)."""
    f = lambda y: sign * m * rmax * y - sign * m * r * math.sin(y) + r * math.cos(y)
    cands = [lo, hi]
    # stationary points: sign*m*r*cos(y) + r*sin(y) = sign*m*rmax
    amp = r * math.hypot(m, 1.0)
    if amp > 0:
        rhs = sign * m * rmax / amp
        if abs(rhs) <= 1.0:
            phi = math.atan2(1.0, sign * m)
            base = math.acos(rhs)
            for y0 in (phi + base, phi - base):
                for shift in (-2, -1, 0, 1, 2):
                    y = y0 + 2 * math.pi * shift
                    if lo <= y <= hi:
                        cands.append(y)
    return max(f(y) for y in cands)


def _envelope_rhs(m, sign, rmin, rmax, lo, hi) -> float:
    return max(_max_on_arc(m, sign, r, rmax, lo, hi) for r in (rmin, rmax))


def _envelope_slope(sign, rmin, rmax, lo, hi) -> float:
    """Largest slope for which the cut stays tight at its anchor with ``r = rmax``."""
    tol = 1e-12 * max(1.0, rmax)
    ok, bad = 0.0, 1.0
    while _envelope_rhs(bad, sign, rmin, rmax, lo, hi) <= rmax + tol:
        ok, bad = bad, 2 * bad
        if bad > 1e6:
            return ok
    for _ in range(60):
        mid = 0.5 * (ok + bad)
        if _envelope_rhs(mid, sign, rmin, rmax, lo, hi) <= rmax + tol:
            ok = mid
        else:
            bad = mid
    return ok


@dataclass(frozen=True)
class _EnvelopeTerm:
    """Cut ``a_th*(th_i - th_j) + a_c*c + a_s*s <= rhs`` for one line."""

    a_th: float
    a_c: float
    a_s: float
    rhs: float
    label: tuple


def _envelope_terms(br: BranchRecord, vmin: tuple[float, float], vmax: tuple[float, float], K: int):
    bound = br.angle_bound
    if bound >= math.pi / 2:
        return []
    lo_d, hi_d = max(br.angle_min, -bound), min(br.angle_max, bound)
    rmin, rmax = vmin[0] * vmin[1], vmax[0] * vmax[1]
    tan_b = math.tan(bound)
    # s = -r sin(dth): |s| <= c tan(bound)
    terms = [
        _EnvelopeTerm(0.0, -tan_b, 1.0, 0.0, ("sector", "+")),
        _EnvelopeTerm(0.0, -tan_b, -1.0, 0.0, ("sector", "-")),
    ]
    if K == 1:
        anchors = [0.0]
    else:
        anchors = list(np.linspace(-bound / 2, bound / 2, K))
    for a in anchors:
        ylo, yhi = lo_d - a, hi_d - a
        ca, sa = math.cos(a), math.sin(a)
        for sign in (1.0, -1.0):
            m = _envelope_slope(sign, rmin, rmax, ylo, yhi)
            d = _envelope_rhs(m, sign, rmin, rmax, ylo, yhi)
            # g = r sin(y) = -s cos a - c sin a ; h = r cos(y) = c cos a - s sin a
            # sign*m*rmax*(dth - a) - sign*m*g + h <= d
            terms.append(_EnvelopeTerm(
                a_th=sign * m * rmax,
                a_c=sign * m * sa + ca,
                a_s=sign * m * ca - sa,
                rhs=d + sign * m * rmax * a,
                label=("tangent", round(float(a), 12), "+" if sign > 0 else "-"),
            ))
    return terms


def arctangent_envelopes(model: ModelIR, line: int, period: int, K: int = 3) -> list[LinearCut]:
    """Envelope cuts of one line in one period over ``model``'s columns.

    ``model`` must already hold ``theta`` variables (see :func:`add_envelopes`).
    Lines whose angle bound reaches pi/2 get no cuts.
    """
    net = model.meta["network"]
    br = net.branches[line]
    if br.angle_bound >= math.pi / 2:
        log.warning("line %d has no usable angle bound; envelopes skipped", line)
        return []
    i, j = net.bus_index[br.from_bus], net.bus_index[br.to_bus]
    bi, bj = net.buses[i], net.buses[j]
    ti, tj = model.var("theta", i, period), model.var("theta", j, period)
    c, s = model.var("c_ij", line, period), model.var("s_ij", line, period)
    out = []
    for term in _envelope_terms(br, (bi.vmin, bj.vmin), (bi.vmax, bj.vmax), K):
        coeffs: dict[int, float] = {}
        if term.a_th:
            coeffs[ti] = term.a_th
            coeffs[tj] = coeffs.get(tj, 0.0) - term.a_th
        coeffs[c] = term.a_c
        coeffs[s] = term.a_s
        coeffs = {k: v for k, v in coeffs.items() if v != 0.0}
        out.append(LinearCut(coeffs, term.rhs, ARCTANGENT, period, label=(line, *term.label)))
    return out


def _ensure_theta(model: ModelIR) -> None:
    net = model.meta["network"]
    for t in range(1, model.meta["horizon"] + 1):
        for k in range(net.n_bus):
            if not model.has_var("theta", k, t):
                if k == net.ref_bus:
                    model.add_var("theta", (k, t), 0.0, 0.0)
                else:
                    model.add_var("theta", (k, t), -math.pi, math.pi)


def add_envelopes(model: ModelIR, K: int = 3) -> tuple[ModelIR, list[LinearCut]]:
    """Copy of ``model`` with angle variables and all envelope cuts added."""
    out = model.copy()
    _ensure_theta(out)
    cuts = []
    for t in range(1, out.meta["horizon"] + 1):
        for l, br in enumerate(out.meta["network"].branches):
            if br.angle_bound < math.pi / 2:
                cuts.extend(arctangent_envelopes(out, l, t, K))
    for cut in cuts:
        out.add_row(cut.coeffs, "<=", cut.rhs, cut.key)
    return out, cuts


# --------------------------------------------------------------------------
# cycle separation


def _cycle_coordinates(model: ModelIR, basis: CycleBasis, k: int, period: int):
    """Pattern coordinates of cycle ``k`` and the model columns they read."""
    net = model.meta["network"]
    buses = basis.cycles[k]
    pos = {b: n for n, b in enumerate(buses)}
    coords, cols = [], []
    for b in buses:
        coords.append((pos[b], pos[b], "re"))
        cols.append(model.var("c_ii", b, period))
    for line, _ in basis.edges[k]:
        br = net.branches[line]
        f, t = pos[net.bus_index[br.from_bus]], pos[net.bus_index[br.to_bus]]
        # W[from, to] = c + i s
        coords.append((f, t, "re"))
        cols.append(model.var("c_ij", line, period))
        coords.append((f, t, "im"))
        cols.append(model.var("s_ij", line, period))
    return len(buses), coords, cols


def _pattern_matrix(size: int, coords, values) -> np.ndarray:
    """Hermitian matrix N with <N, Y> = sum(values * y) for patterns Y."""
    n = np.zeros((size, size), dtype=complex)
    for (k, l, part), v in zip(coords, values):
        if k == l:
            n[k, k] += v
            continue
        # coefficient v on Re/Im of Y[k, l] equals 2 Re(conj(N[k, l]) Y[k, l])
        z = v / 2 if part == "re" else 1j * v / 2
        n[k, l] += z
        n[l, k] += np.conj(z)
    return n


def separate_cycle(
    model: ModelIR,
    basis: CycleBasis,
    cycle: int,
    period: int,
    x: np.ndarray,
    eps_cut: float = 1e-5,
    options: ConicOptions | None = None,
) -> LinearCut | None:
    """Supporting-hyperplane cut for one cycle at the point ``x``, or ``None``."""
    size, coords, cols = _cycle_coordinates(model, basis, cycle, period)
    target = np.array([x[j] for j in cols])
    proj = solve_small_psd(size, coords, target, options)
    if proj.status != "optimal":
        log.info("projection for cycle %d period %d failed (%s); no cut", cycle, period, proj.status)
        return None
    wn = proj.weights * proj.normal
    norm = math.sqrt(float(np.dot(wn, proj.normal)))
    if norm < eps_cut:
        return None
    coef = wn / norm
    # every PSD completion Y obeys <N, Y> <= lam_max * trace(Y); shifting the
    # diagonal by lam_max keeps the cut exactly valid despite solver error
    lam = float(np.linalg.eigvalsh(_pattern_matrix(size, coords, coef))[-1])
    if lam > 0:
        coef = coef.copy()
        for r, (k, l, _) in enumerate(coords):
            if k == l:
                coef[r] -= lam
    coeffs: dict[int, float] = {}
    for j, v in zip(cols, coef):
        coeffs[j] = coeffs.get(j, 0.0) + float(v)
    cut = LinearCut(coeffs, 0.0, SDP, period, label=(cycle,))
    cut.violation = cut.violation_at(x)
    if cut.violation < eps_cut:
        return None
    return cut


@dataclass
class CutLoopResult:
    cuts: list[LinearCut] = field(default_factory=list)
    lb_trace: list[float] = field(default_factory=list)
    model: ModelIR | None = None
    status: str = "ok"


def cut_loop(
    model: ModelIR,
    basis: CycleBasis,
    rounds: int = 5,
    eps_cut: float = 1e-5,
    enable_sdp: bool = True,
    options: ConicOptions | None = None,
) -> CutLoopResult:
    """Solve, separate every cycle of every period, add the violated cuts, repeat.

    ``model`` is a continuous relaxation. One lower bound is recorded per
    solve; the loop stops early when a round finds no cut.
    """
    work = model.copy()
    res = CutLoopResult(model=work)
    horizon = work.meta["horizon"]
    for rnd in range(rounds):
        sol = solve_conic(work, options)
        if not sol.ok:
            log.warning("relaxation failed in cut round %d (%s)", rnd + 1, sol.status)
            res.status = sol.status
            break
        bound = sol.objective
        if res.lb_trace:
            # cuts only shrink the feasible set; clip solver noise
            bound = max(bound, res.lb_trace[-1])
        res.lb_trace.append(bound)
        if not enable_sdp or not len(basis):
            break
        found = []
        for t in range(1, horizon + 1):
            for k in range(len(basis)):
                cut = separate_cycle(work, basis, k, t, sol.primal, eps_cut)
                if cut is not None:
                    found.append(cut)
        log.info("cut round %d: bound %.6f, %d new cuts", rnd + 1, bound, len(found))
        if not found:
            break
        for cut in found:
            work.add_row(cut.coeffs, "<=", cut.rhs, cut.key)
        res.cuts.extend(found)
        if rnd == rounds - 1:
            final = solve_conic(work, options)
            if final.ok:
                res.lb_trace.append(max(final.objective, res.lb_trace[-1]))
    return res


def _describe(model: ModelIR, j: int) -> str:
    v = model.variables[j]
    return f"{v.kind}[{','.join(str(i) for i in v.index)}]"


def write_cut_dump(cuts: list[LinearCut], model: ModelIR, path) -> None:
    """One cut per line: ``origin period row rhs`` with ``coef*name`` terms."""
    lines = ["# origin period row rhs"]
    for cut in cuts:
        row = " ".join(f"{c:+.17g}*{_describe(model, j)}" for j, c in sorted(cut.coeffs.items()))
        lines.append(f"{cut.origin} {cut.period} {row} <= {cut.rhs:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class Strengthened:
    """Integer model carrying envelopes and separated cuts, plus the loop record."""

    model: ModelIR
    envelopes: list[LinearCut]
    loop: CutLoopResult

    @property
    def cuts(self) -> list[LinearCut]:
        return self.envelopes + self.loop.cuts


def strengthen_model(
    model: ModelIR,
    rounds: int = 5,
    K: int = 3,
    enable_sdp: bool = True,
    options: ConicOptions | None = None,
) -> Strengthened:
    """Envelopes on every angle-limited line, then ``rounds`` of cycle separation
    on the continuous relaxation; the cuts are copied into the integer model."""
    enhanced, envelopes = add_envelopes(model, K)
    loop = CutLoopResult(model=enhanced.relaxed())
    if rounds > 0:
        loop = cut_loop(enhanced.relaxed(), cycle_basis(model.meta["network"]), rounds, enable_sdp=enable_sdp,
                        options=options)
    for cut in loop.cuts:
        enhanced.add_row(cut.coeffs, "<=", cut.rhs, cut.key)
    return Strengthened(enhanced, envelopes, loop)
