r"""Decay-rate machinery for nonlinear feedback (Lasiecka-Tataru construction).

For each feedback component ``g_i`` a concave, nondecreasing ``h_i`` with
``h_i(0) = 0`` is built so that

.. math:: h_i(s\,g_i(s)) \ge s^2 + g_i(s)^2, \qquad |s| \le 1.

With :math:`\hat h(y) = \sum_i h_i(y / |Q_T|)` and :math:`|Q_T| = |\Omega| T`,

.. math::

    z(x) = (\mu I + \hat h)^{-1}(L x), \qquad
    \mathcal R(x) = x - (I + z)^{-1}(x),

and the envelope solves :math:`S' + \mathcal R(S) = 0`, :math:`S(0) = E_0`.
Sequences with :math:`s_{m+1} + z(s_{m+1}) \le s_m` satisfy
:math:`s_m \le S(m)`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateFeedback,
    HypothesisViolated,
    NonPositiveConstant,
    TrajectoryTooShort,
)

__all__ = [
    "ConcaveMajorant",
    "DecayCalculus",
    "Envelope",
    "SequenceReport",
    "EnergyRecursionReport",
    "construct_h",
    "build_calculus",
    "solve_envelope",
    "check_sequence_lemma",
    "check_sequence_lemma_batch",
    "check_energy_recursion",
    "upper_concave_hull",
    "TABLE_KNOTS",
]

TABLE_KNOTS = 4096


# -- concave majorants -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConcaveMajorant:
    """Piecewise-linear concave nondecreasing function with ``h(0) = 0``.

    Linear beyond the last knot with slope ``tail_slope``.
    """

    knots: np.ndarray
    values: np.ndarray
    tail_slope: float
    provenance: str = "least-concave-majorant"

    @classmethod
    def linear(cls, slope: float = 1.0) -> "ConcaveMajorant":
        return cls(np.array([0.0, 1.0]), np.array([0.0, slope]), float(slope), "analytic")

    def __call__(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        inner = np.interp(x, self.knots, self.values)
        tail = self.values[-1] + self.tail_slope * (x - self.knots[-1])
        return np.where(x > self.knots[-1], tail, inner)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.knots)

    def second_differences(self, n: int = TABLE_KNOTS) -> np.ndarray:
        """Second differences on a uniform grid over ``[0, knots[-1]]``."""
        return np.diff(self(np.linspace(0.0, self.knots[-1], n)), 2)


def upper_concave_hull(x: np.ndarray, y: np.ndarray) -> tuple:
    """Vertices of the least concave majorant of the points ``(x, y)``."""
    order = np.lexsort((-y, x))
    x, y = x[order], y[order]
    keep = np.concatenate([[True], np.diff(x) > 0])  # max y per abscissa
    x, y = x[keep], y[keep]
    hx, hy = [], []
    for xi, yi in zip(x, y):
        while len(hx) >= 2:
            # drop the middle point when it lies on or below the chord
            cross = (hx[-1] - hx[-2]) * (yi - hy[-2]) - (hy[-1] - hy[-2]) * (xi - hx[-2])
            if cross >= 0:
                hx.pop()
                hy.pop()
            else:
                break
        hx.append(xi)
        hy.append(yi)
    return np.array(hx), np.array(hy)


def _curve(g, s):
    gs = np.asarray(g(s), dtype=float)
    return s * gs, s**2 + gs**2


def _parameter_samples(n_points: int, per_octave: int = 8, octaves: int = 24) -> np.ndarray:
    """Uniform grid on ``[0, 1]`` plus a geometric refinement below its first step."""
    s = np.linspace(0.0, 1.0, n_points)
    fine = s[1] * 2.0 ** (-np.arange(1, per_octave * octaves + 1) / per_octave)
    pos = np.unique(np.concatenate([s, fine]))
    return np.concatenate([-pos[::-1], pos])


def _monotone_hull(x, y):
    """Least concave nondecreasing majorant through ``(0, 0)``: knots, values, tail slope."""
    hx, hy = upper_concave_hull(np.append(x, 0.0), np.append(y, 0.0))
    if hx[0] != 0.0:
        raise DegenerateFeedback("hull does not start at the origin")
    hy[0] = 0.0
    top = int(np.argmax(hy))
    if top == len(hy) - 1 and len(hy) > 1:
        return hx, hy, float((hy[-1] - hy[-2]) / (hx[-1] - hx[-2]))
    return hx[: top + 1], hy[: top + 1], 0.0


def _check_samples(n_points: int, per_octave: int = 64, octaves: int = 75) -> np.ndarray:
    """Positive parameters: uniform grid on ``(0, 1]`` united with a geometric one from 1 down."""
    uni = np.linspace(0.0, 1.0, n_points)[1:]
    geo = 2.0 ** (-np.arange(0, per_octave * octaves + 1) / per_octave)
    return np.unique(np.concatenate([uni, geo]))


STAIRCASE_BELOW = 1e-2


def construct_h(g: Callable, n_points: int = 2048, check_factor: int = 16) -> ConcaveMajorant:
    """Least concave nondecreasing majorant of the curve ``(s g(s), s^2 + g(s)^2)``.

    The curve is sampled for ``s`` in ``[-1, 1]`` on an ``n_points`` grid per
    sign plus a geometric refinement towards 0. Chords of the hull can dip
    below strictly concave parts of the curve between samples, so a concave
    correction is added, built as the upper hull of the deficits on a much
    finer check set. For ``|s|`` below ``STAIRCASE_BELOW`` the deficit at a
    check point is ``y(s_next) - h(x(s))``: since both coordinates grow with
    ``|s|`` and ``h`` is nondecreasing, that certifies domination on the
    whole gap. Elsewhere the pointwise deficit is used with a 1% margin.
    """
    s = _parameter_samples(n_points)
    x, y = _curve(g, s)
    if not np.all(np.isfinite(x)) or np.max(x) <= 0:
        raise DegenerateFeedback("s g(s) vanishes on [-1, 1]; no majorant can be built")
    if np.min(x) < -1e-14:
        raise DegenerateFeedback("s g(s) < 0 somewhere on [-1, 1]; g is not a feedback law")
    hx, hy, slope = _monotone_hull(np.maximum(x, 0.0), y)
    h = ConcaveMajorant(hx, hy, slope)

    s_pos = _check_samples(check_factor * (n_points - 1) + 1)
    pts_x, pts_d = [], []
    for branch in (s_pos, -s_pos):
        xc, yc = _curve(g, branch)
        xc = np.maximum(xc, 0.0)
        raw = yc - h(xc)
        d = 1.01 * raw
        stair = np.append(yc[1:], yc[-1]) - h(xc)
        # gaps where the curve genuinely rises above the chord (not roundoff)
        above = raw > 1e-13 * yc
        active = above | np.append(above[1:], False)
        small = (np.abs(branch) < STAIRCASE_BELOW) & active
        d[small] = np.maximum(d[small], stair[small])
        pts_x.append(xc)
        pts_d.append(d)
    px, pd = np.concatenate(pts_x), np.concatenate(pts_d)
    if np.max(pd) <= 0:
        return h
    lx, ly = upper_concave_hull(px, np.maximum(pd, 0.0))
    ly[0] = 0.0
    tail = min(0.0, float((ly[-1] - ly[-2]) / (lx[-1] - lx[-2]))) if len(lx) > 1 else 0.0
    lift = ConcaveMajorant(lx, ly, tail)
    knots = np.union1d(hx, lx)
    kx, kv, ks = _monotone_hull(knots, h(knots) + lift(knots))
    return ConcaveMajorant(kx, kv, ks + tail if ks > 0 else 0.0)


# -- z, R and the calculus ---------------------------------------------------

def _bisect(phi, target, hi, max_iter=400):
    """Vectorized root of increasing ``phi(y) = target`` on ``[0, hi]``."""
    target = np.asarray(target, dtype=float)
    lo = np.zeros_like(target)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    for _ in range(max_iter):
        width = hi - lo
        if np.all((width <= 1e-12) & (width <= 1e-14 * hi)):
            break
        mid = 0.5 * (lo + hi)
        stuck = (mid <= lo) | (mid >= hi)
        if np.all(stuck | (width == 0)):
            break
        up = phi(mid) >= target
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return 0.5 * (lo + hi)


@dataclass(frozen=True, eq=False)
class DecayCalculus:
    h_list: tuple
    meas_QT: float
    L: float
    mu: float
    C_obs: float = float("nan")
    x_max: float = 1.0
    r_form: str = "I+z"
    knots: np.ndarray = field(default=None, repr=False)
    z_table: np.ndarray = field(default=None, repr=False)
    R_table: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("meas_QT", "L", "mu", "x_max"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise NonPositiveConstant(f"{name} must be positive, got {val}")
        if self.r_form not in ("I+z", "I-z"):
            raise ValueError(f"r_form must be 'I+z' or 'I-z', got {self.r_form!r}")
        if self.knots is None:
            knots = np.linspace(0.0, self.x_max, TABLE_KNOTS)
            object.__setattr__(self, "knots", knots)
            object.__setattr__(self, "z_table", self.z(knots, "bisect"))
            object.__setattr__(self, "R_table", self.R(knots, "bisect"))

    @classmethod
    def from_constants(cls, h_list, meas_QT, L, mu, **kw) -> "DecayCalculus":
        return cls(tuple(h_list), float(meas_QT), float(L), float(mu), **kw)

    def h_hat(self, y):
        y = np.asarray(y, dtype=float)
        return sum(h(y / self.meas_QT) for h in self.h_list)

    def _piecewise(self) -> bool:
        return all(isinstance(h, ConcaveMajorant) for h in self.h_list)

    def _solve(self, c, target, method):
        """Root ``y >= 0`` of ``c y + h_hat(y) = target`` (increasing in ``y``).

        For piecewise-linear majorants the left side is piecewise linear, so
        it is inverted exactly by interpolation through its breakpoints;
        otherwise (or with ``method='bisect'``) by bisection.
        """
        if method not in ("auto", "bisect"):
            raise ValueError(f"method must be 'auto' or 'bisect', got {method!r}")
        if method == "bisect" or not self._piecewise():
            return _bisect(lambda y: c * y + self.h_hat(y), target, target / c)
        cache = self.__dict__.setdefault("_inverse_cache", {})
        if c not in cache:
            Y = np.unique(np.concatenate([[0.0]] + [self.meas_QT * h.knots for h in self.h_list]))
            phi = c * Y + self.h_hat(Y)
            tail = c + sum(h.tail_slope for h in self.h_list) / self.meas_QT
            cache[c] = (Y, phi, tail)
        Y, phi, tail = cache[c]
        inner = np.interp(np.minimum(target, phi[-1]), phi, Y)
        return np.where(target > phi[-1], Y[-1] + (target - phi[-1]) / tail, inner)

    def z(self, x, method: str = "auto"):
        """``(mu I + h_hat)^{-1}(L x)``."""
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return self._solve(self.mu, self.L * x, method)

    def _R_plus(self, x, method="auto"):
        return self._solve(self.mu + self.L, self.L * x, method)

    def R(self, x, method: str = "auto"):
        """``x - (I + z)^{-1}(x)`` (or the ``I - z`` variant when selected).

        With ``y = z(w)`` and ``w + z(w) = x`` one has ``R(x) = y`` and
        ``(mu + L) y + h_hat(y) = L x``, which is solved directly.
        """
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        if self.r_form == "I+z":
            return self._R_plus(x, method)
        c = self.mu - self.L
        if c <= 0:
            raise ValueError("I - z is not invertible by bisection when mu <= L")
        return -self._solve(c, self.L * x, method)

    def inverse_I_plus_z(self, x):
        """``w`` with ``w + z(w) = x``."""
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return x - self._R_plus(x)

    def constants(self) -> dict:
        return {"L": self.L, "mu": self.mu, "C_obs": self.C_obs, "meas_QT": self.meas_QT,
                "r_form": self.r_form}


def build_calculus(h_list: Sequence[ConcaveMajorant], omega_measure: float, T: float,
                   C_obs: float, m: float, M: float, a_sup: float, *, x_max: float = 1.0,
                   r_form: str = "I+z") -> DecayCalculus:
    """Constants ``L = 1/(C (1 + |a|_inf) |Q_T|)``, ``mu = (1 + 1/m + M)/((1 + |a|_inf) |Q_T|)``."""
    for name, val in (("C_obs", C_obs), ("T", T), ("omega_measure", omega_measure),
                      ("m", m), ("M", M)):
        if not (np.isfinite(val) and val > 0):
            raise NonPositiveConstant(f"{name} must be positive, got {val}")
    if a_sup < 0:
        raise NonPositiveConstant(f"a_sup must be nonnegative, got {a_sup}")
    meas = float(omega_measure) * float(T)
    L = 1.0 / (C_obs * (1.0 + a_sup) * meas)
    mu = (1.0 + 1.0 / m + M) / ((1.0 + a_sup) * meas)
    return DecayCalculus(tuple(h_list), meas, L, mu, float(C_obs), float(x_max), r_form)


# -- envelope ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Envelope:
    times: np.ndarray
    S: np.ndarray
    E0: np.ndarray

    def at_step(self, k):
        return self.S[k]


def solve_envelope(calc: DecayCalculus, E0, horizon: float, steps: int) -> Envelope:
    """Classical RK4 for ``S' = -R(S)``, ``S(0) = E0``; ``E0`` may be an array."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    E0 = np.asarray(E0, dtype=float)
    if np.any(E0 < 0):
        raise ValueError("E0 must be nonnegative")
    dt = float(horizon) / steps
    rate = lambda s: calc.R(np.maximum(s, 0.0))  # noqa: E731
    out = np.empty((steps + 1,) + E0.shape)
    out[0] = E0
    s = E0.copy()
    for k in range(steps):
        k1 = rate(s)
        k2 = rate(s - 0.5 * dt * k1)
        k3 = rate(s - 0.5 * dt * k2)
        k4 = rate(s - dt * k3)
        s = np.maximum(s - dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0)
        out[k + 1] = s
    return Envelope(np.linspace(0.0, horizon, steps + 1), out, E0)


# -- sequence lemma ----------------------------------------------------------

@dataclass
class SequenceReport:
    hypothesis_holds: bool
    margins: np.ndarray
    envelope: np.ndarray
    dominated: bool
    worst_ratio: float


def _first_violation(seqs, calc, rtol):
    nxt = seqs[:, 1:]
    lhs = nxt + calc.z(nxt)
    bad = lhs > seqs[:, :-1] * (1.0 + rtol) + 1e-300
    margins = seqs[:, :-1] - lhs
    idx = np.where(bad.any(axis=1), bad.argmax(axis=1) + 1, -1)
    return idx, margins


def check_sequence_lemma_batch(seqs, calc: DecayCalculus, steps_per_unit: int = 32,
                               rtol: float = 1e-10, dominance_rtol: float = 1e-9) -> dict:
    """Vectorized check over rows of ``seqs``.

    Returns ``violation_index`` (``-1`` when the recursion holds), the
    envelope ``S(m)`` per row, and ``dominated`` (only meaningful for rows
    whose recursion holds).
    """
    seqs = np.atleast_2d(np.asarray(seqs, dtype=float))
    if seqs.shape[1] < 1 or not np.all(np.isfinite(seqs)) or np.any(seqs < 0):
        raise ValueError("sequences must be finite and nonnegative")
    idx, margins = _first_violation(seqs, calc, rtol)
    n_terms = seqs.shape[1]
    if n_terms > 1:
        env = solve_envelope(calc, seqs[:, 0], n_terms - 1, (n_terms - 1) * steps_per_unit)
        S_m = env.S[::steps_per_unit].T
    else:
        S_m = seqs[:, :1].copy()
    dominated = np.all(seqs <= S_m * (1.0 + dominance_rtol), axis=1)
    ratio = np.max(np.divide(seqs, S_m, out=np.zeros_like(seqs), where=S_m > 0), axis=1)
    return {"violation_index": idx, "margins": margins, "S_m": S_m, "dominated": dominated,
            "worst_ratio": ratio}


def check_sequence_lemma(s_seq, calc: DecayCalculus, steps_per_unit: int = 32,
                         rtol: float = 1e-10) -> SequenceReport:
    """Check ``s_{m+1} + z(s_{m+1}) <= s_m`` and then ``s_m <= S(m)``.

    Raises :class:`HypothesisViolated` with the first offending index ``m + 1``.
    """
    res = check_sequence_lemma_batch(s_seq, calc, steps_per_unit, rtol)
    k = int(res["violation_index"][0])
    if k >= 0:
        raise HypothesisViolated(f"s[{k}] + z(s[{k}]) > s[{k - 1}]", index=k)
    return SequenceReport(True, res["margins"][0], res["S_m"][0], bool(res["dominated"][0]),
                          float(res["worst_ratio"][0]))


# -- energy recursion --------------------------------------------------------

@dataclass
class EnergyRecursionReport:
    T: float
    E_mT: np.ndarray
    lhs: np.ndarray
    margins: np.ndarray
    recursion_holds: bool
    first_failure: int
    S_m: np.ndarray
    lemma_dominated: bool
    times: np.ndarray
    energies: np.ndarray
    bound: np.ndarray
    envelope_dominated: bool
    worst_envelope_ratio: float


def check_energy_recursion(trajectory, calc: DecayCalculus, T: float, *, rtol: float = 1e-8,
                           envelope_rtol: float = 1e-6) -> EnergyRecursionReport:
    """Sampled check of ``z(E((m+1)T)) + E((m+1)T) <= E(mT)`` and ``E(t) <= S(t/T - 1)``.

    ``T`` must be a multiple of the trajectory's sample period.
    """
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    n_win = int(np.floor(trajectory.t_final / T + 1e-9))
    if n_win < 2:
        raise TrajectoryTooShort(f"trajectory spans {trajectory.t_final:g} < 2T = {2 * T:g}")
    e = trajectory.e_series
    E_mT = np.array([e[trajectory.index_at(m * T)] for m in range(n_win + 1)])
    nxt = E_mT[1:]
    lhs = calc.z(nxt) + nxt
    ok = lhs <= E_mT[:-1] * (1.0 + rtol)
    first = int(np.argmin(ok)) if not np.all(ok) else -1

    k_T = trajectory.index_at(T)
    n_after = len(e) - 1 - k_T
    env = solve_envelope(calc, E_mT[0], (trajectory.times[-1] - T) / T, max(n_after, 1))
    S_int = solve_envelope(calc, E_mT[0], n_win, n_win * 32).S[::32]
    times = trajectory.times[k_T + 1:]
    bound = env.S[1:n_after + 1]
    energies = e[k_T + 1:]
    dominated = bool(np.all(energies <= bound * (1.0 + envelope_rtol)))
    worst = float(np.max(np.divide(energies, bound, out=np.zeros_like(energies), where=bound > 0))) \
        if len(energies) else 0.0
    lemma_ok = bool(np.all(E_mT <= S_int * (1.0 + envelope_rtol)))
    return EnergyRecursionReport(T, E_mT, lhs, E_mT[:-1] - lhs, bool(np.all(ok)), first, S_int,
                                 lemma_ok, times, energies, bound, dominated, worst)
