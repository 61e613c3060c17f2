"""24-period unit commitment instances built from a single-period AC OPF case.

Each demand bus follows one of three normalised real-demand profiles whose
peak equals the case demand; reactive demand follows a common profile.
Generators get one of three types that fix ramp rates and minimum up/down
times, and fixed/startup costs are multiples of the linear cost term.

Randomness comes from ``numpy.random.Generator(PCG64(seed))`` so an
instance is reproducible from ``(network, seed)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .case_io import Network, network_from_dict, network_to_dict

__all__ = [
    "HORIZON",
    "DemandProfile",
    "UcGeneratorParams",
    "UcInstance",
    "builtin_profiles",
    "generate_instance",
    "make_instance",
    "wrap_prev",
    "wrap_next",
    "uptime_window",
    "downtime_window",
    "instance_to_dict",
    "instance_from_dict",
    "save_instance",
    "load_instance",
]

HORIZON = 24

# hourly values, period 1 first
_PROFILE_TABLE = {
    "Real1": (0.68, 0.64, 0.61, 0.60, 0.60, 0.62, 0.67, 0.74, 0.80, 0.84, 0.89, 0.92,
              0.94, 0.95, 0.97, 0.99, 1.00, 0.96, 0.96, 0.92, 0.92, 0.88, 0.78, 0.76),
    "Real2": (0.57, 0.64, 0.68, 0.71, 0.75, 0.78, 0.82, 0.85, 0.88, 0.92, 0.97, 1.00,
              0.92, 0.88, 0.85, 0.78, 0.71, 0.78, 0.85, 0.92, 0.85, 0.78, 0.71, 0.64),
    "Real3": (0.67, 0.63, 0.60, 0.59, 0.59, 0.60, 0.74, 0.86, 0.95, 0.96, 0.96, 0.95,
              0.95, 0.95, 0.93, 0.94, 0.99, 1.00, 1.00, 0.96, 0.91, 0.83, 0.73, 0.63),
    "MaxReal": (0.68, 0.64, 0.68, 0.71, 0.75, 0.78, 0.82, 0.86, 0.95, 0.96, 0.97, 1.00,
                0.95, 0.95, 0.97, 0.99, 1.00, 1.00, 1.00, 0.96, 0.92, 0.88, 0.78, 0.76),
    "Reactive": (0.68, 0.65, 0.62, 0.60, 0.61, 0.63, 0.68, 0.69, 0.73, 0.81, 0.89, 0.92,
                 0.95, 0.95, 0.97, 1.00, 1.00, 0.96, 0.96, 0.93, 0.93, 0.91, 0.77, 0.76),
}

# type -> (pmax divisor for the ramp rate, min up/down periods)
_GEN_TYPES = {1: (2.0, 2), 2: (3.0, 3), 3: (5.0, 4)}


@dataclass(frozen=True)
class DemandProfile:
    name: str
    values: tuple[float, ...]

    def __getitem__(self, t: int) -> float:
        """Value at period ``t`` (1-based)."""
        return self.values[t - 1]


@dataclass(frozen=True)
class UcGeneratorParams:
    type: int
    RU: float
    RD: float
    MinUp: int
    MinDw: int
    fixed_cost: float
    startup_cost: float
    shutdown_cost: float = 0.0

    @classmethod
    def from_type(cls, gen_type: int, pmin: float, pmax: float, linear_cost: float):
        divisor, min_time = _GEN_TYPES[gen_type]
        ramp = max(pmin, pmax / divisor)
        return cls(
            type=gen_type,
            RU=ramp,
            RD=ramp,
            MinUp=min_time,
            MinDw=min_time,
            fixed_cost=5.0 * linear_cost,
            startup_cost=100.0 * linear_cost,
            shutdown_cost=0.0,
        )


@dataclass(frozen=True, eq=False)
class UcInstance:
    """A network with per-period demand and per-generator commitment data.

    ``pd`` and ``qd`` have shape ``(n_bus, T)``; column ``t - 1`` holds
    period ``t``. The horizon is treated as cyclic.
    """

    network: Network
    pd: np.ndarray
    qd: np.ndarray
    gen_params: tuple[UcGeneratorParams, ...]
    seed: int | None = None
    name: str = ""
    profile_names: tuple[str, ...] = ()

    @property
    def horizon(self) -> int:
        return self.pd.shape[1]

    @property
    def periods(self) -> range:
        return range(1, self.horizon + 1)

    def prev(self, t: int) -> int:
        return wrap_prev(t, self.horizon)

    def next(self, t: int) -> int:
        return wrap_next(t, self.horizon)

    def uptime_window(self, i: int, t: int) -> list[int]:
        return uptime_window(self.gen_params[i].MinUp, t, self.horizon)

    def downtime_window(self, i: int, t: int) -> list[int]:
        return downtime_window(self.gen_params[i].MinDw, t, self.horizon)

    def __eq__(self, other):
        if not isinstance(other, UcInstance):
            return NotImplemented
        return (
            network_to_dict(self.network) == network_to_dict(other.network)
            and np.array_equal(self.pd, other.pd)
            and np.array_equal(self.qd, other.qd)
            and self.gen_params == other.gen_params
            and self.seed == other.seed
        )


def builtin_profiles() -> dict[str, DemandProfile]:
    return {name: DemandProfile(name, vals) for name, vals in _PROFILE_TABLE.items()}


def wrap_prev(t: int, horizon: int = HORIZON) -> int:
    if not 1 <= t <= horizon:
        raise ValueError(f"period {t} outside 1..{horizon}")
    return horizon if t == 1 else t - 1


def wrap_next(t: int, horizon: int = HORIZON) -> int:
    if not 1 <= t <= horizon:
        raise ValueError(f"period {t} outside 1..{horizon}")
    return 1 if t == horizon else t + 1


def uptime_window(min_up: int, t: int, horizon: int = HORIZON) -> list[int]:
    """Periods whose startup keeps the unit on at ``t``, in cyclic order."""
    return [(t - min_up + j) % horizon + 1 for j in range(min_up)]


downtime_window = uptime_window


def generate_instance(
    network: Network,
    seed: int,
    include_max_profile: bool = False,
    name: str | None = None,
) -> UcInstance:
    """Random 24-period instance from a single-period case."""
    rng = np.random.Generator(np.random.PCG64(seed))
    profiles = builtin_profiles()
    choices = ["Real1", "Real2", "Real3"] + (["MaxReal"] if include_max_profile else [])
    reactive = np.array(profiles["Reactive"].values)

    nb = network.n_bus
    pd = np.zeros((nb, HORIZON))
    qd = np.zeros((nb, HORIZON))
    assigned = []
    for k, bus in enumerate(network.buses):
        prof = choices[int(rng.integers(len(choices)))]
        assigned.append(prof)
        if bus.pd != 0:
            pd[k] = np.array(profiles[prof].values) * bus.pd
        if bus.qd != 0:
            qd[k] = reactive * bus.qd

    params = []
    for gen in network.generators:
        gtype = int(rng.integers(1, 4))
        params.append(UcGeneratorParams.from_type(gtype, gen.pmin, gen.pmax, gen.cost_linear))

    return UcInstance(
        network=network,
        pd=pd,
        qd=qd,
        gen_params=tuple(params),
        seed=seed,
        name=name if name is not None else network.name,
        profile_names=tuple(assigned),
    )


def make_instance(network: Network, pd, qd, gen_params, name: str = "") -> UcInstance:
    """Hand-built instance with an arbitrary horizon (used for small test cases)."""
    pd = np.atleast_2d(np.asarray(pd, dtype=float))
    qd = np.atleast_2d(np.asarray(qd, dtype=float))
    if pd.shape != qd.shape or pd.shape[0] != network.n_bus:
        raise ValueError("demand arrays must have shape (n_bus, T)")
    if len(gen_params) != network.n_gen:
        raise ValueError("need one UcGeneratorParams per generator")
    return UcInstance(network=network, pd=pd, qd=qd, gen_params=tuple(gen_params), name=name)


def instance_to_dict(inst: UcInstance) -> dict:
    return {
        "name": inst.name,
        "seed": inst.seed,
        "horizon": inst.horizon,
        "network": network_to_dict(inst.network),
        "pd": inst.pd.tolist(),
        "qd": inst.qd.tolist(),
        "gen_params": [asdict(p) for p in inst.gen_params],
        "profiles": list(inst.profile_names),
    }


def instance_from_dict(doc: dict) -> UcInstance:
    pd = np.array(doc["pd"], dtype=float)
    if pd.shape[1] != doc["horizon"]:
        raise ValueError("demand matrix does not match the declared horizon")
    return UcInstance(
        network=network_from_dict(doc["network"]),
        pd=pd,
        qd=np.array(doc["qd"], dtype=float),
        gen_params=tuple(UcGeneratorParams(**p) for p in doc["gen_params"]),
        seed=doc.get("seed"),
        name=doc.get("name", ""),
        profile_names=tuple(doc.get("profiles", ())),
    )


def save_instance(inst: UcInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1))


def load_instance(path) -> UcInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))
