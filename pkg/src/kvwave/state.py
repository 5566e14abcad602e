"""Simulation state and trajectory containers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SimState", "Trajectory"]


@dataclass(frozen=True, eq=False)
class SimState:
    """Displacement ``u`` and velocity ``v`` on the interior nodes at time ``t``."""

    t: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != v.shape:
            raise ValueError(f"u and v must be conformal, got {u.shape} and {v.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))


@dataclass(eq=False)
class Trajectory:
    """Samples of a run every ``stride`` steps, with cumulative ledgers.

    ``d_kv_cum`` and ``d_fric_cum`` accumulate the Kelvin-Voigt and frictional
    dissipation; ``obs_cum`` accumulates the observability integrand
    ``a (|grad v|^2 + |g(grad v)|^2) + eta v^2``. All three use the same
    theta-weighted velocity as the time step.
    """

    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    potential_F: np.ndarray
    d_kv_cum: np.ndarray
    d_fric_cum: np.ndarray
    obs_cum: np.ndarray
    dt: float
    theta: float
    stride: int

    @property
    def e_series(self) -> np.ndarray:
        return self.kinetic + self.potential + self.potential_F

    total = e_series

    def __len__(self):
        return len(self.times)

    @property
    def t_final(self) -> float:
        return float(self.times[-1]) if len(self.times) else 0.0

    @property
    def states(self) -> list:
        return [SimState(t, u, v) for t, u, v in zip(self.times, self.u, self.v)]

    def index_at(self, t: float) -> int:
        """Sample index whose time equals ``t`` (to 1e-9 relative)."""
        period = self.dt * self.stride
        k = int(round(t / period))
        if k < 0 or k >= len(self.times) or abs(k * period - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t = {t:g} is not a sample time of this trajectory "
                             f"(sample period {period:g}, t_final {self.t_final:g})")
        return k
