"""Energy functional, dissipation rates and the energy balance check."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import discrete_ops as ops
from .errors import EmptyTrajectory

__all__ = [
    "EnergyBreakdown",
    "energy",
    "dissipation_rate",
    "observability_density",
    "BalanceReport",
    "balance_residual",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential: float
    potential_F: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential + self.potential_F


def energy(state, f, grid) -> EnergyBreakdown:
    """``1/2 int |v|^2 + 1/2 int |grad u|^2 + int F(u)`` on the grid."""
    kin = 0.5 * ops.integrate(state.v**2, grid)
    pot = 0.5 * sum(ops.integrate(w**2, grid) for w in ops.gradient(state.u, grid))
    pot_F = ops.integrate(f.F(state.u), grid)
    return EnergyBreakdown(float(kin), float(pot), float(pot_F))


def _rates(v, grid, profile, g):
    grads = ops.gradient(v, grid)
    kv = sum(ops.integrate(a * comp(w) * w, grid)
             for a, w, comp in zip(profile.a_faces, grads, g.components))
    fric = ops.integrate(profile.eta_nodes * v**2, grid)
    return float(kv), float(fric)


def dissipation_rate(state, grid, profile, g) -> tuple:
    """``(sum_i int a g_i(d_i v) d_i v, int eta v^2)`` at the state's velocity."""
    return _rates(state.v, grid, profile, g)


def observability_density(v, grid, profile, g) -> float:
    """``int a (|grad v|^2 + |g(grad v)|^2) + int eta v^2``."""
    grads = ops.gradient(v, grid)
    kv = sum(ops.integrate(a * (w**2 + comp(w) ** 2), grid)
             for a, w, comp in zip(profile.a_faces, grads, g.components))
    return float(kv + ops.integrate(profile.eta_nodes * v**2, grid))


@dataclass(frozen=True)
class BalanceReport:
    series: np.ndarray
    max: float
    normalized: bool


def balance_residual(trajectory) -> BalanceReport:
    """``|E(t) + D_kv(t) + D_fric(t) - E(0)| / E(0)`` along the trajectory.

    Falls back to the absolute residual when ``E(0) == 0``.
    """
    if len(trajectory) == 0:
        raise EmptyTrajectory("trajectory has no samples")
    e = trajectory.e_series
    r = np.abs(e + trajectory.d_kv_cum + trajectory.d_fric_cum - e[0])
    normalized = e[0] > 0
    if normalized:
        r = r / e[0]
    return BalanceReport(r, float(np.max(r)), bool(normalized))
