"""Commitment schedules and the logical/min-up/min-down system they obey."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["CommitmentSchedule", "ScheduleError"]


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CommitmentSchedule:
    """Binary ``u``/``v``/``w`` arrays of shape ``(n_gen, T)``; column ``t-1`` is period ``t``."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("u", "v", "w"):
            arr = np.asarray(getattr(self, name))
            if arr.ndim != 2:
                raise ScheduleError(f"{name} must be a 2-d array")
            r = np.rint(arr)
            if np.abs(arr - r).max(initial=0.0) > 1e-6 or not np.all((r == 0) | (r == 1)):
                raise ScheduleError(f"{name} is not binary")
            object.__setattr__(self, name, r.astype(int))
        if not self.u.shape == self.v.shape == self.w.shape:
            raise ScheduleError("u, v, w shapes differ")

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    def __eq__(self, other):
        if not isinstance(other, CommitmentSchedule):
            return NotImplemented
        return (
            np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.w, other.w)
        )

    @classmethod
    def from_u(cls, u) -> "CommitmentSchedule":
        """Derive startups/shutdowns from a cyclic on/off pattern."""
        u = np.rint(np.asarray(u, dtype=float)).astype(int)
        prev = np.roll(u, 1, axis=1)
        return cls(u=u, v=np.maximum(u - prev, 0), w=np.maximum(prev - u, 0))

    @classmethod
    def all_on(cls, n_gen: int, horizon: int) -> "CommitmentSchedule":
        return cls.from_u(np.ones((n_gen, horizon), dtype=int))

    def violations(self, instance) -> list[str]:
        """Every row of the logical, min-up and min-down system that fails."""
        out = []
        n_gen, T = self.shape
        if n_gen != instance.network.n_gen or T != instance.horizon:
            return [f"schedule shape {self.shape} does not match the instance"]
        u, v, w = self.u, self.v, self.w
        for i in range(n_gen):
            for t in range(1, T + 1):
                k, kp = t - 1, instance.prev(t) - 1
                if u[i, k] - u[i, kp] != v[i, k] - w[i, k]:
                    out.append(f"logical equality fails for generator {i} at period {t}")
                if v[i, k] > u[i, k]:
                    out.append(f"startup without commitment for generator {i} at period {t}")
                if w[i, k] + u[i, k] > 1:
                    out.append(f"shutdown while committed for generator {i} at period {t}")
                if sum(v[i, tau - 1] for tau in instance.uptime_window(i, t)) > u[i, k]:
                    out.append(f"minimum uptime violated for generator {i} at period {t}")
                if sum(w[i, tau - 1] for tau in instance.downtime_window(i, t)) > 1 - u[i, k]:
                    out.append(f"minimum downtime violated for generator {i} at period {t}")
        return out

    def is_valid(self, instance) -> bool:
        return not self.violations(instance)

    def to_dict(self) -> dict:
        return {"u": self.u.tolist(), "v": self.v.tolist(), "w": self.w.tolist()}
