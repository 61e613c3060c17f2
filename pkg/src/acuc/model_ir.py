"""Solver-agnostic conic model: variables, linear rows and cone constraints.

Affine expressions are ``(coeffs, constant)`` pairs where ``coeffs`` maps a
variable index to its coefficient. Cones:

* ``SocConstraint``: ``|| tail ||_2 <= head``
* ``RotatedSocConstraint``: ``sum(tail**2) <= left * right`` with
  ``left, right >= 0``
* ``PsdConstraint``: the symmetric matrix whose upper triangle (column
  major) is ``entries`` is positive semidefinite.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Affine",
    "Variable",
    "LinearRow",
    "SocConstraint",
    "RotatedSocConstraint",
    "PsdConstraint",
    "ModelIR",
    "export_text",
]

Affine = tuple[dict[int, float], float]

BINARY_KINDS = frozenset({"u", "v", "w"})


@dataclass
class Variable:
    kind: str
    index: tuple
    lo: float = -math.inf
    hi: float = math.inf
    binary: bool = False


@dataclass
class LinearRow:
    coeffs: dict[int, float]
    sense: str  # "<=", ">=" or "=="
    rhs: float
    key: tuple = ()

    @property
    def tag(self) -> str:
        return self.key[0] if self.key else ""

    def activity(self, x) -> float:
        return sum(c * x[j] for j, c in self.coeffs.items())

    def violation(self, x) -> float:
        """Amount by which ``x`` violates the row (0 when satisfied)."""
        a = self.activity(x)
        if self.sense == "<=":
            return max(0.0, a - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - a)
        return abs(a - self.rhs)


def _eval(expr: Affine, x) -> float:
    coeffs, const = expr
    return const + sum(c * x[j] for j, c in coeffs.items())


@dataclass
class SocConstraint:
    head: Affine
    tail: list[Affine]
    key: tuple = ()

    def violation(self, x) -> float:
        return max(0.0, math.hypot(*[_eval(e, x) for e in self.tail]) - _eval(self.head, x))


@dataclass
class RotatedSocConstraint:
    left: Affine
    right: Affine
    tail: list[Affine]
    key: tuple = ()

    def as_soc(self) -> SocConstraint:
        """Equivalent standard cone ``||(2 tail, l - r)|| <= l + r``."""
        (lc, lk), (rc, rk) = self.left, self.right
        plus = dict(lc)
        minus = dict(lc)
        for j, c in rc.items():
            plus[j] = plus.get(j, 0.0) + c
            minus[j] = minus.get(j, 0.0) - c
        tail = [({j: 2 * c for j, c in e[0].items()}, 2 * e[1]) for e in self.tail]
        tail.append((minus, lk - rk))
        return SocConstraint(head=(plus, lk + rk), tail=tail, key=self.key)

    def violation(self, x) -> float:
        return self.as_soc().violation(x)


@dataclass
class PsdConstraint:
    size: int
    entries: list[Affine]  # upper triangle, column major
    key: tuple = ()

    def matrix(self, x) -> np.ndarray:
        m = np.zeros((self.size, self.size))
        k = 0
        for j in range(self.size):
            for i in range(j + 1):
                m[i, j] = m[j, i] = _eval(self.entries[k], x)
                k += 1
        return m

    def violation(self, x) -> float:
        return max(0.0, -float(np.linalg.eigvalsh(self.matrix(x))[0]))


@dataclass
class ModelIR:
    variables: list[Variable] = field(default_factory=list)
    rows: list[LinearRow] = field(default_factory=list)
    socs: list[SocConstraint] = field(default_factory=list)
    rsocs: list[RotatedSocConstraint] = field(default_factory=list)
    psds: list[PsdConstraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    name: str = ""
    meta: dict = field(default_factory=dict)
    _lookup: dict = field(default_factory=dict, repr=False)

    # -- construction -----------------------------------------------------
    def add_var(self, kind: str, index: tuple, lo=-math.inf, hi=math.inf, binary=False) -> int:
        key = (kind, index)
        if key in self._lookup:
            raise ValueError(f"variable {key} declared twice")
        self.variables.append(Variable(kind, index, float(lo), float(hi), binary))
        self._lookup[key] = len(self.variables) - 1
        return len(self.variables) - 1

    def var(self, kind: str, *index) -> int:
        return self._lookup[(kind, tuple(index))]

    def has_var(self, kind: str, *index) -> bool:
        return (kind, tuple(index)) in self._lookup

    def add_row(self, coeffs: dict[int, float], sense: str, rhs: float, key: tuple = ()) -> int:
        if sense not in ("<=", ">=", "=="):
            raise ValueError(f"bad sense {sense!r}")
        clean = {j: float(c) for j, c in coeffs.items() if c != 0}
        self.rows.append(LinearRow(clean, sense, float(rhs), key))
        return len(self.rows) - 1

    def add_soc(self, head: Affine, tail: list[Affine], key: tuple = ()) -> None:
        self.socs.append(SocConstraint(head, list(tail), key))

    def add_rsoc(self, left: Affine, right: Affine, tail: list[Affine], key: tuple = ()) -> None:
        self.rsocs.append(RotatedSocConstraint(left, right, list(tail), key))

    def add_objective(self, j: int, c: float) -> None:
        self.objective[j] = self.objective.get(j, 0.0) + c

    # -- queries ----------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def binaries(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.binary]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([v.lo for v in self.variables])
        hi = np.array([v.hi for v in self.variables])
        return lo, hi

    def tags(self) -> set[str]:
        out = {r.tag for r in self.rows}
        out |= {c.key[0] for c in self.socs if c.key}
        out |= {c.key[0] for c in self.rsocs if c.key}
        out |= {c.key[0] for c in self.psds if c.key}
        out.discard("")
        return out

    def count(self, kind: str) -> int:
        return sum(1 for v in self.variables if v.kind == kind)

    def objective_value(self, x) -> float:
        return self.objective_constant + sum(c * x[j] for j, c in self.objective.items())

    def max_violation(self, x, tol_bounds: bool = True) -> float:
        worst = 0.0
        for r in self.rows:
            worst = max(worst, r.violation(x))
        for c in (*self.socs, *self.rsocs, *self.psds):
            worst = max(worst, c.violation(x))
        if tol_bounds:
            for j, v in enumerate(self.variables):
                worst = max(worst, v.lo - x[j], x[j] - v.hi)
        return worst

    def copy(self) -> "ModelIR":
        """Copy whose variable bounds and constraint lists can change independently."""
        out = copy.copy(self)
        out.variables = [copy.copy(v) for v in self.variables]
        out.rows = list(self.rows)
        out.socs = list(self.socs)
        out.rsocs = list(self.rsocs)
        out.psds = list(self.psds)
        out.objective = dict(self.objective)
        out.meta = dict(self.meta)
        out._lookup = dict(self._lookup)
        return out

    def relaxed(self) -> "ModelIR":
        """Continuous relaxation (binaries become [0, 1] variables)."""
        out = self.copy()
        for v in out.variables:
            v.binary = False
        return out

    def row_matrix(self, rows: Iterable[LinearRow] | None = None) -> sp.csr_matrix:
        rows = self.rows if rows is None else list(rows)
        data, ri, ci = [], [], []
        for k, r in enumerate(rows):
            for j, c in r.coeffs.items():
                ri.append(k)
                ci.append(j)
                data.append(c)
        return sp.csr_matrix((data, (ri, ci)), shape=(len(rows), self.n_vars))


def _fmt_affine(expr: Affine) -> str:
    coeffs, const = expr
    parts = [f"{c:.17g}*x{j}" for j, c in sorted(coeffs.items())]
    if const or not parts:
        parts.append(f"{const:.17g}")
    return " + ".join(parts)


def export_text(model: ModelIR) -> str:
    """Plain-text dump with VARIABLES, ROWS, CONES and OBJECTIVE sections."""
    out = [f"# model {model.name}", "VARIABLES"]
    for j, v in enumerate(model.variables):
        kind = "bin" if v.binary else "cont"
        out.append(f"x{j} {v.kind}{list(v.index)} {kind} [{v.lo:.17g}, {v.hi:.17g}]")
    out.append("ROWS")
    for r in model.rows:
        out.append(f"{r.key} {_fmt_affine((r.coeffs, 0.0))} {r.sense} {r.rhs:.17g}")
    out.append("CONES")
    for c in model.socs:
        out.append(f"SOC {c.key} head: {_fmt_affine(c.head)}")
        out.extend(f"  tail: {_fmt_affine(e)}" for e in c.tail)
    for c in model.rsocs:
        out.append(f"RSOC {c.key} left: {_fmt_affine(c.left)} right: {_fmt_affine(c.right)}")
        out.extend(f"  tail: {_fmt_affine(e)}" for e in c.tail)
    for c in model.psds:
        out.append(f"PSD{c.size} {c.key}")
        out.extend(f"  entry: {_fmt_affine(e)}" for e in c.entries)
    out.append("OBJECTIVE")
    out.append(f"min {_fmt_affine((model.objective, model.objective_constant))}")
    return "\n".join(out) + "\n"
