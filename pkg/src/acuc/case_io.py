"""Reading MATPOWER case files into a per-unit :class:`Network`.

Only the bus, gen, branch and gencost matrices are used. Extra columns are
ignored and out-of-service elements are dropped while parsing.
"""

from __future__ import annotations

import cmath
import json
import math
import re
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

__all__ = [
    "BusRecord",
    "BranchRecord",
    "GeneratorRecord",
    "Network",
    "CaseParseError",
    "NetworkValidationError",
    "branch_admittance",
    "parse_case",
    "load_case",
    "builtin_case",
    "builtin_case_names",
    "network_to_dict",
    "network_from_dict",
    "dumps_network",
    "loads_network",
    "with_angle_limits",
]

PQ, PV, REF, ISOLATED = 1, 2, 3, 4
_BUS_TYPES = {PQ: "PQ", PV: "PV", REF: "ref"}


class CaseParseError(ValueError):
    """Raised when case text cannot be read as MATPOWER tables."""


class NetworkValidationError(ValueError):
    """Raised when parsed data violates a network invariant."""


@dataclass(frozen=True)
class BusRecord:
    id: int
    type: str
    pd: float
    qd: float
    gs_shunt: float
    bs_shunt: float
    vmin: float
    vmax: float


@dataclass(frozen=True)
class BranchRecord:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charge: float
    tap: float
    shift: float
    s_max: float  # math.inf when the case gives no rating
    angle_min: float
    angle_max: float
    Gff: float = 0.0
    Bff: float = 0.0
    Gft: float = 0.0
    Bft: float = 0.0
    Gtf: float = 0.0
    Btf: float = 0.0
    Gtt: float = 0.0
    Btt: float = 0.0

    @property
    def angle_bound(self) -> float:
        """Largest absolute angle difference allowed on the line."""
        return max(abs(self.angle_min), abs(self.angle_max))

    @property
    def has_angle_bounds(self) -> bool:
        return self.angle_bound < math.pi / 2

    def admittance_matrix(self) -> tuple[tuple[complex, complex], tuple[complex, complex]]:
        return (
            (complex(self.Gff, self.Bff), complex(self.Gft, self.Bft)),
            (complex(self.Gtf, self.Btf), complex(self.Gtt, self.Btt)),
        )


@dataclass(frozen=True)
class GeneratorRecord:
    bus: int
    pmin: float
    pmax: float
    qmin: float
    qmax: float
    cost_quadratic: float
    cost_linear: float
    cost_constant: float

    def cost(self, p: float) -> float:
        return self.cost_quadratic * p * p + self.cost_linear * p + self.cost_constant


@dataclass(frozen=True)
class Network:
    base_mva: float
    buses: tuple[BusRecord, ...]
    branches: tuple[BranchRecord, ...]
    generators: tuple[GeneratorRecord, ...]
    name: str = ""
    adjacency: dict[int, tuple[int, ...]] = field(init=False, repr=False, compare=False)
    bus_index: dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {b.id: k for k, b in enumerate(self.buses)}
        nbrs: dict[int, set[int]] = {b.id: set() for b in self.buses}
        for br in self.branches:
            if br.from_bus in nbrs and br.to_bus in nbrs:
                nbrs[br.from_bus].add(br.to_bus)
                nbrs[br.to_bus].add(br.from_bus)
        object.__setattr__(self, "bus_index", index)
        object.__setattr__(self, "adjacency", {k: tuple(sorted(v)) for k, v in nbrs.items()})

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    @property
    def ref_bus(self) -> int:
        """Index of the reference bus (first bus when none is marked)."""
        for k, b in enumerate(self.buses):
            if b.type == "ref":
                return k
        return 0

    def gens_at(self, bus_pos: int) -> list[int]:
        bid = self.buses[bus_pos].id
        return [g for g, gen in enumerate(self.generators) if gen.bus == bid]

    def lines_from(self, bus_pos: int) -> list[int]:
        bid = self.buses[bus_pos].id
        return [l for l, br in enumerate(self.branches) if br.from_bus == bid]

    def lines_to(self, bus_pos: int) -> list[int]:
        bid = self.buses[bus_pos].id
        return [l for l, br in enumerate(self.branches) if br.to_bus == bid]

    def validate(self) -> None:
        if self.base_mva <= 0:
            raise NetworkValidationError("base_mva must be positive")
        if len(self.bus_index) != len(self.buses):
            raise NetworkValidationError("duplicate bus ids")
        for b in self.buses:
            if not 0 < b.vmin <= b.vmax:
                raise NetworkValidationError(f"bus {b.id}: need 0 < vmin <= vmax")
        for l, br in enumerate(self.branches):
            if br.from_bus not in self.bus_index or br.to_bus not in self.bus_index:
                raise NetworkValidationError(f"branch {l} references an unknown bus")
            if br.x == 0:
                raise NetworkValidationError(f"branch {l} ({br.from_bus}-{br.to_bus}) has x = 0")
            if not br.s_max > 0:
                raise NetworkValidationError(f"branch {l} has non-positive rating")
            if not br.angle_min < 0 < br.angle_max:
                raise NetworkValidationError(f"branch {l}: need angle_min < 0 < angle_max")
        for g, gen in enumerate(self.generators):
            if gen.bus not in self.bus_index:
                raise NetworkValidationError(f"generator {g} sits on unknown bus {gen.bus}")
            if gen.pmin > gen.pmax or gen.qmin > gen.qmax:
                raise NetworkValidationError(f"generator {g} has inverted limits")
            if gen.cost_quadratic < 0:
                raise NetworkValidationError(f"generator {g} has a concave cost")
        if not self.buses:
            raise NetworkValidationError("network has no buses")
        seen = {self.buses[0].id}
        queue = deque([self.buses[0].id])
        while queue:
            for j in self.adjacency[queue.popleft()]:
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
        if len(seen) != len(self.buses):
            raise NetworkValidationError(
                f"network is disconnected ({len(seen)} of {len(self.buses)} buses reachable)"
            )


def branch_admittance(r, x, b_charge, tap=1.0, shift=0.0):
    """Real and imaginary parts of the two-port admittance of a Pi-model branch.

    Parameters
    ----------
    r, x : float
        Series resistance and reactance (p.u.).
    b_charge : float
        Total line charging susceptance (p.u.), split evenly between ends.
    tap : float
        Off-nominal turns ratio on the from side.
    shift : float
        Phase shift in radians.

    Returns
    -------
    tuple
        ``(Gff, Bff, Gft, Bft, Gtf, Btf, Gtt, Btt)``.
    """
    if r == 0 and x == 0:
        raise ValueError("branch has zero series impedance")
    if not tap > 0:
        raise ValueError("tap ratio must be positive")
    ys = 1.0 / complex(r, x)
    t = tap * cmath.exp(1j * shift)
    ytt = ys + 0.5j * b_charge
    yff = ytt / (tap * tap)
    yft = -ys / t.conjugate()
    ytf = -ys / t
    return (yff.real, yff.imag, yft.real, yft.imag, ytf.real, ytf.imag, ytt.real, ytt.imag)


def _make_branch(**kw) -> BranchRecord:
    blocks = branch_admittance(kw["r"], kw["x"], kw["b_charge"], kw["tap"], kw["shift"])
    names = ("Gff", "Bff", "Gft", "Bft", "Gtf", "Btf", "Gtt", "Btt")
    return BranchRecord(**kw, **dict(zip(names, blocks)))


_ASSIGN = re.compile(r"^\s*mpc\.(\w+)\s*=\s*(.*)$")


def _strip_comment(line: str) -> str:
    # MATPOWER comments start with '%'; quoted strings never contain one in
    # the supported tables.
    return line.split("%", 1)[0]


def _read_tables(text: str) -> tuple[dict[str, float], dict[str, list[tuple[int, list[float]]]]]:
    scalars: dict[str, float] = {}
    tables: dict[str, list[tuple[int, list[float]]]] = {}
    lines = text.splitlines()
    k = 0
    while k < len(lines):
        lineno = k + 1
        line = _strip_comment(lines[k])
        k += 1
        m = _ASSIGN.match(line)
        if not m:
            continue
        name, rhs = m.group(1), m.group(2).strip()
        if not rhs.startswith(("[", "{")):
            value = rhs.rstrip(";").strip()
            try:
                scalars[name] = float(value)
            except ValueError:
                pass  # e.g. mpc.version = '2'
            continue
        if rhs.startswith("{"):
            # cell arrays (bus names etc.) are skipped
            while "}" not in line and k < len(lines):
                line = _strip_comment(lines[k])
                k += 1
            continue
        rows: list[tuple[int, list[float]]] = []
        body = rhs[1:]
        body_lineno = lineno
        closed = False
        while True:
            if "]" in body:
                body = body.split("]", 1)[0]
                closed = True
            for chunk in body.split(";"):
                tokens = chunk.replace(",", " ").split()
                if not tokens:
                    continue
                try:
                    rows.append((body_lineno, [float(tok) for tok in tokens]))
                except ValueError as exc:
                    raise CaseParseError(
                        f"line {body_lineno}: non-numeric entry in mpc.{name}: {chunk.strip()!r}"
                    ) from exc
            if closed:
                break
            if k >= len(lines):
                raise CaseParseError(f"line {lineno}: table mpc.{name} is never closed")
            body = _strip_comment(lines[k])
            body_lineno = k + 1
            k += 1
        tables[name] = rows
    return scalars, tables


def _check_width(name: str, rows, width: int) -> None:
    for lineno, row in rows:
        if len(row) < width:
            raise CaseParseError(
                f"line {lineno}: mpc.{name} row has {len(row)} columns, expected at least {width}"
            )


def parse_case(text: str, name: str = "") -> Network:
    """Parse MATPOWER case text into a validated per-unit network."""
    scalars, tables = _read_tables(text)
    for required in ("bus", "gen", "branch", "gencost"):
        if required not in tables:
            raise CaseParseError(f"case has no mpc.{required} table")
    base = scalars.get("baseMVA", 100.0)
    _check_width("bus", tables["bus"], 13)
    _check_width("gen", tables["gen"], 10)
    _check_width("branch", tables["branch"], 11)
    _check_width("gencost", tables["gencost"], 4)
    if len(tables["gencost"]) < len(tables["gen"]):
        lineno = tables["gencost"][-1][0] if tables["gencost"] else 0
        raise CaseParseError(f"line {lineno}: fewer gencost rows than generators")

    buses = []
    for lineno, row in tables["bus"]:
        btype = int(row[1])
        if btype == ISOLATED:
            continue
        if btype not in _BUS_TYPES:
            raise CaseParseError(f"line {lineno}: unknown bus type {btype}")
        buses.append(
            BusRecord(
                id=int(row[0]),
                type=_BUS_TYPES[btype],
                pd=row[2] / base,
                qd=row[3] / base,
                gs_shunt=row[4] / base,
                bs_shunt=row[5] / base,
                vmin=row[12],
                vmax=row[11],
            )
        )
    live = {b.id for b in buses}

    gens = []
    for (lineno, row), (clineno, cost) in zip(tables["gen"], tables["gencost"]):
        if row[7] <= 0 or int(row[0]) not in live:
            continue
        model, ncoef = int(cost[0]), int(cost[3])
        if model != 2:
            raise CaseParseError(f"line {clineno}: only polynomial gencost (model 2) is supported")
        coefs = cost[4 : 4 + ncoef]
        if len(coefs) != ncoef or ncoef > 3:
            raise CaseParseError(f"line {clineno}: expected at most 3 polynomial coefficients")
        c2, c1, c0 = ([0.0] * (3 - ncoef) + list(coefs))[-3:]
        gens.append(
            GeneratorRecord(
                bus=int(row[0]),
                pmin=row[9] / base,
                pmax=row[8] / base,
                qmin=row[4] / base,
                qmax=row[3] / base,
                cost_quadratic=c2 * base * base,
                cost_linear=c1 * base,
                cost_constant=c0,
            )
        )

    branches = []
    for lineno, row in tables["branch"]:
        if row[10] <= 0:
            continue
        f, t = int(row[0]), int(row[1])
        if f not in live or t not in live:
            continue
        if row[3] == 0:
            raise NetworkValidationError(f"line {lineno}: branch {f}-{t} has x = 0")
        amin = math.radians(row[11]) if len(row) > 12 else -2 * math.pi
        amax = math.radians(row[12]) if len(row) > 12 else 2 * math.pi
        if amin == 0 and amax == 0:
            amin, amax = -2 * math.pi, 2 * math.pi
        rate = row[5]
        branches.append(
            _make_branch(
                from_bus=f,
                to_bus=t,
                r=row[2],
                x=row[3],
                b_charge=row[4],
                tap=row[8] if row[8] != 0 else 1.0,
                shift=math.radians(row[9]),
                s_max=rate / base if rate > 0 else math.inf,
                angle_min=amin,
                angle_max=amax,
            )
        )

    net = Network(
        base_mva=base,
        buses=tuple(buses),
        branches=tuple(branches),
        generators=tuple(gens),
        name=name,
    )
    net.validate()
    return net


def load_case(path) -> Network:
    path = Path(path)
    return parse_case(path.read_text(), name=path.stem)


def builtin_case_names() -> list[str]:
    files = resources.files("acuc.data").iterdir()
    return sorted(p.name[:-2] for p in files if p.name.endswith(".m"))


def builtin_case(name: str, angle_limit_deg: float | None = 30.0) -> Network:
    """Load one of the bundled MATPOWER cases.

    ``angle_limit_deg`` replaces missing angle-difference bounds (the
    MATPOWER +/-360 default); pass ``None`` to keep the file's values.
    """
    text = resources.files("acuc.data").joinpath(f"{name}.m").read_text()
    net = parse_case(text, name=name)
    if angle_limit_deg is not None:
        net = with_angle_limits(net, math.radians(angle_limit_deg))
    return net


def with_angle_limits(net: Network, limit: float) -> Network:
    """Impose ``|angle difference| <= limit`` on lines lacking a tighter bound."""
    branches = tuple(
        replace(br, angle_min=max(br.angle_min, -limit), angle_max=min(br.angle_max, limit))
        for br in net.branches
    )
    return replace(net, branches=branches)


def _num(v: float):
    return None if math.isinf(v) else v


def network_to_dict(net: Network) -> dict:
    return {
        "name": net.name,
        "base_mva": net.base_mva,
        "buses": [asdict(b) for b in net.buses],
        "branches": [
            {k: _num(v) if isinstance(v, float) else v for k, v in asdict(br).items()}
            for br in net.branches
        ],
        "generators": [asdict(g) for g in net.generators],
    }


def network_from_dict(doc: dict) -> Network:
    branches = []
    for raw in doc["branches"]:
        br = dict(raw)
        if br.get("s_max") is None:
            br["s_max"] = math.inf
        branches.append(BranchRecord(**br))
    net = Network(
        base_mva=float(doc["base_mva"]),
        buses=tuple(BusRecord(**b) for b in doc["buses"]),
        branches=tuple(branches),
        generators=tuple(GeneratorRecord(**g) for g in doc["generators"]),
        name=doc.get("name", ""),
    )
    net.validate()
    return net


def dumps_network(net: Network) -> str:
    return json.dumps(network_to_dict(net), indent=1)


def loads_network(text: str) -> Network:
    return network_from_dict(json.loads(text))
