"""Empirical observability constants.

For an ensemble of smooth initial data the ratio

    E(0) / int_0^T [ int a (|grad v|^2 + |g(grad v)|^2) + int eta v^2 ] dt

is computed and its maximum reported as ``c_emp``. Being a maximum over a
finite ensemble, ``c_emp`` is a lower bound for the true constant of the
inequality, never an upper one.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, List, Sequence

import numpy as np

from .discrete_ops import gradient, integrate
from .energy import energy
from .errors import DampingAbsent, TrajectoryTooShort
from .state import SimState, Trajectory
from .stepper import StepParams, WaveModel, simulate

__all__ = [
    "ObservabilityReport",
    "SweepRow",
    "damping_functional",
    "dirichlet_modes",
    "initial_ensemble",
    "estimate_constant",
    "estimate_constant_windows",
    "sweep_geometries",
    "report_rows",
    "N_MODES",
]

N_MODES = 8


@dataclass
class ObservabilityReport:
    T: float
    samples: List[tuple]  # (E0, functional, ratio)
    c_emp: float
    gcc_satisfied: bool
    radius_R: float
    seed: int = 0

    @property
    def ratios(self) -> np.ndarray:
        return np.array([s[2] for s in self.samples])


def report_rows(report: ObservabilityReport) -> list:
    """CSV rows ``sample_id, E0, functional, ratio`` plus a ``c_emp`` summary row."""
    rows = [(i, e0, fn, r) for i, (e0, fn, r) in enumerate(report.samples)]
    rows.append(("c_emp", "", "", report.c_emp))
    return rows


def damping_functional(trajectory: Trajectory, T: float) -> float:
    """Dissipation functional over ``[0, T]`` read from the trajectory ledger.

    Time quadrature uses the same theta-weighted velocity as the stepper, so
    for the identity feedback this equals ``2 D_kv(T) + D_fric(T)`` to roundoff.
    """
    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    if len(trajectory) == 0 or trajectory.t_final < T * (1.0 - 1e-12) - 1e-12:
        raise TrajectoryTooShort(f"trajectory ends at {trajectory.t_final:g} < T = {T:g}")
    return float(trajectory.obs_cum[trajectory.index_at(T)])


def dirichlet_modes(grid, n_modes: int = N_MODES) -> tuple:
    """Nodal values of the ``n_modes`` lowest Dirichlet eigenfunctions and eigenvalues."""
    if grid.dim == 1:
        L = grid.extents[0]
        ks = np.arange(1, n_modes + 1)
        x = grid.node_coords[:, 0]
        modes = np.array([np.sin(k * np.pi * x / L) for k in ks])
        return modes, (ks * np.pi / L) ** 2
    Lx, Ly = grid.extents
    pairs = [(j, k) for j in range(1, n_modes + 1) for k in range(1, n_modes + 1)]
    lam = np.array([(j * np.pi / Lx) ** 2 + (k * np.pi / Ly) ** 2 for j, k in pairs])
    order = np.argsort(lam, kind="stable")[:n_modes]
    x, y = grid.node_coords[:, 0], grid.node_coords[:, 1]
    modes = np.array([np.sin(pairs[i][0] * np.pi * x / Lx) * np.sin(pairs[i][1] * np.pi * y / Ly)
                      for i in order])
    return modes, lam[order]


def _energy_norm(u, v, grid) -> float:
    return float(np.sqrt(sum(integrate(w * w, grid) for w in gradient(u, grid))
                         + integrate(v * v, grid)))


def initial_ensemble(grid, n_samples: int, radius_R: float = 1.0, seed: int = 0,
                     n_modes: int = N_MODES) -> list:
    """Seeded smooth data: mode coefficients ~ N(0, 1) / lambda_k, rescaled so the
    ``H^1_0 x L^2`` norm is uniform in ``(0, 2 R]``."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if radius_R <= 0:
        raise ValueError(f"radius_R must be positive, got {radius_R}")
    rng = np.random.default_rng(seed)
    modes, lam = dirichlet_modes(grid, n_modes)
    # 1/k^2 decay in 1D; keep u0 and u1 on comparable energy scales
    w_u = lam[0] / lam
    w_v = np.sqrt(lam[0] * lam) / lam
    out = []
    for _ in range(n_samples):
        cu = rng.standard_normal(len(lam)) * w_u
        cv = rng.standard_normal(len(lam)) * w_v
        u0, v0 = cu @ modes, cv @ modes
        target = 2.0 * radius_R * (1.0 - rng.random())  # in (0, 2R]
        norm = _energy_norm(u0, v0, grid)
        scale = target / norm if norm > 0 else 0.0
        out.append(SimState(0.0, u0 * scale, v0 * scale))
    return out


def _aligned_dt(dt: float, windows: Sequence[float]) -> float:
    """Largest step <= ``dt`` that lands on every window end, when one exists nearby."""
    T_max = max(windows)
    n0 = int(np.ceil(T_max / dt - 1e-9))
    for n in range(n0, 8 * n0 + 1):
        step = T_max / n
        if all(abs(T / step - round(T / step)) < 1e-9 * n for T in windows):
            return step
    return T_max / n0


def _check_damping(model: WaveModel):
    if not model.profile.has_damping:
        raise DampingAbsent("a and eta vanish identically; the dissipation functional is zero")


def estimate_constant_windows(model: WaveModel, params: StepParams, n_samples: int,
                              windows: Sequence[float], radius_R: float = 1.0,
                              seed: int = 0) -> dict:
    """Reports for several windows from one simulation per sample (to ``max(windows)``)."""
    windows = [float(T) for T in windows]
    if not windows or min(windows) <= 0:
        raise ValueError("windows must be nonempty and positive")
    _check_damping(model)
    T_max = max(windows)
    params = replace(params, dt=_aligned_dt(params.dt, windows))
    samples = {T: [] for T in windows}
    for state in initial_ensemble(model.grid, n_samples, radius_R, seed):
        traj = simulate(model, state, params, T_max)
        E0 = energy(state, model.f, model.grid).total
        for T in windows:
            fn = float(np.interp(T, traj.times, traj.obs_cum))  # exact at sample times
            if E0 > 0 and not fn > 0:
                raise DampingAbsent(f"dissipation functional vanishes for a sample with "
                                    f"E0 = {E0:.3e} on window T = {T:g}")
            ratio = E0 / fn if E0 > 0 else 0.0
            samples[T].append((float(E0), fn, float(ratio)))
    return {T: ObservabilityReport(T, s, max(r for *_, r in s), bool(model.profile.gcc_satisfied),
                                   float(radius_R), seed)
            for T, s in samples.items()}


def estimate_constant(model: WaveModel, params: StepParams, n_samples: int, T: float,
                      radius_R: float = 1.0, seed: int = 0) -> ObservabilityReport:
    """``c_emp = max E0 / functional`` over a seeded ensemble; deterministic in ``seed``."""
    return estimate_constant_windows(model, params, n_samples, [T], radius_R, seed)[float(T)]


@dataclass
class SweepRow:
    name: str
    gcc_satisfied: bool
    c_emp: float
    status: str = "ok"
    detail: str = ""


def sweep_geometries(scenarios: Iterable, n_samples: int, T: float, radius_R: float = 1.0,
                     seed: int = 0) -> List[SweepRow]:
    """One row per ``(name, model, params)``; a scenario with no usable dissipation
    gets ``status = 'DampingAbsent'`` and ``c_emp = inf``."""
    rows = []
    for name, model, params in scenarios:
        try:
            rep = estimate_constant(model, params, n_samples, T, radius_R, seed)
        except DampingAbsent as exc:
            rows.append(SweepRow(name, bool(model.profile.gcc_satisfied), float("inf"),
                                 "DampingAbsent", str(exc)))
        else:
            rows.append(SweepRow(name, rep.gcc_satisfied, rep.c_emp))
    return rows
