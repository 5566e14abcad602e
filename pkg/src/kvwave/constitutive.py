"""Source nonlinearity ``f`` and componentwise feedback law ``g``.

Assumptions on both are checked by dense sampling; the catalog of built-in
laws is small on purpose:

* ``f``: ``zero``, ``power`` (``|s|**(p-1) * s``) and ``cubic-clipped``
  (``s**3`` up to ``|s| = clip``, continued linearly with matching slope).
* ``g_i``: ``linear``, ``cubic-near-zero`` (``s**3`` for ``|s| <= 1``, ``s``
  beyond) and ``saturating`` (``(1 - beta) * s + beta * tanh(s)``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .errors import (
    GrowthBoundViolated,
    GrowthViolated,
    KVWaveError,
    NotMonotone,
    SignConditionViolated,
    SupercriticalExponent,
)

__all__ = [
    "Nonlinearity",
    "ScalarFeedback",
    "FeedbackLaw",
    "CheckResult",
    "ValidationReport",
    "make_nonlinearity",
    "make_feedback",
    "validate",
    "F_KINDS",
    "G_KINDS",
]

F_KINDS = ("zero", "power", "cubic-clipped")
G_KINDS = ("linear", "cubic-near-zero", "saturating")

ScalarMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    eval_f: ScalarMap
    eval_fprime: Optional[ScalarMap]
    p: float
    k0: float
    kind: str = "custom"
    eval_F_closed: Optional[ScalarMap] = field(default=None, repr=False)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def f(self, s):
        return self.eval_f(np.asarray(s, dtype=float))

    def fprime(self, s):
        if self.eval_fprime is None:
            raise NotImplementedError(f"nonlinearity {self.kind!r} has no derivative")
        return self.eval_fprime(np.asarray(s, dtype=float))

    def F(self, s):
        """Antiderivative ``F(s) = int_0^s f``; adaptive quadrature for custom laws."""
        s = np.asarray(s, dtype=float)
        if self.eval_F_closed is not None:
            return self.eval_F_closed(s)
        flat = [integrate.quad(lambda r: float(self.eval_f(np.asarray(r))), 0.0, float(x),
                               epsabs=1e-13, epsrel=1e-12)[0] for x in s.ravel()]
        return np.asarray(flat).reshape(s.shape)


def _power(p):
    def f(s):
        return np.abs(s) ** (p - 1) * s

    def fp(s):
        return p * np.abs(s) ** (p - 1)

    def F(s):
        return np.abs(s) ** (p + 1) / (p + 1)

    return f, fp, F


def _cubic_clipped(c):
    def f(s):
        a = np.abs(s)
        return np.where(a <= c, s**3, np.sign(s) * (c**3 + 3 * c**2 * (a - c)))

    def fp(s):
        return np.where(np.abs(s) <= c, 3 * s**2, 3 * c**2)

    def F(s):
        a = np.abs(s)
        t = a - c
        return np.where(a <= c, a**4 / 4, c**4 / 4 + c**3 * t + 1.5 * c**2 * t**2)

    return f, fp, F


def make_nonlinearity(kind: str = "zero", *, p: float = 3.0, clip: float = 1.0,
                      ambient_dim: int = 1, f=None, fprime=None, k0: float | None = None,
                      validate_samples: bool = True) -> Nonlinearity:
    """Build a source nonlinearity and validate it on ``[-5, 5]``.

    ``ambient_dim`` is the space dimension used for the subcritical exponent
    check ``p < n / (n - 2)`` when ``n >= 3``. ``kind="custom"`` takes a user
    callable ``f`` (and optionally ``fprime``).

    Examples
    --------
    >>> law = make_nonlinearity("power", p=3, ambient_dim=2)
    >>> float(law.F(2.0)), float(law.f(2.0) * 2.0)
    (4.0, 16.0)
    """
    if kind not in F_KINDS + ("custom",):
        raise ValueError(f"unknown nonlinearity {kind!r}; catalog: {', '.join(F_KINDS)}")
    if kind == "zero":
        zero = lambda s: np.zeros_like(np.asarray(s, dtype=float))  # noqa: E731
        law = Nonlinearity(zero, zero, 1.0, 0.0, "zero", zero)
    elif kind == "power":
        ff, fp, FF = _power(float(p))
        law = Nonlinearity(ff, fp, float(p), float(p), "power", FF)
    elif kind == "cubic-clipped":
        if clip <= 0:
            raise ValueError(f"clip must be positive, got {clip}")
        ff, fp, FF = _cubic_clipped(float(clip))
        law = Nonlinearity(ff, fp, 1.0, 3.0 * clip**2, "cubic-clipped", FF)
    else:
        if f is None:
            raise ValueError("custom nonlinearity needs f")
        law = Nonlinearity(f, fprime, float(p), float(k0 if k0 is not None else np.inf), "custom")

    if law.p < 1:
        raise SupercriticalExponent(f"growth exponent must satisfy p >= 1, got {law.p}")
    n = int(ambient_dim)
    if n >= 3 and not law.p < n / (n - 2):
        raise SupercriticalExponent(
            f"p = {law.p:g} violates p < n/(n-2) = {n / (n - 2):g} in dimension {n}")
    if validate_samples:
        validate(law, (-5.0, 5.0), 1001).raise_for_failure()
    return law


@dataclass(frozen=True, eq=False)
class ScalarFeedback:
    func: ScalarMap
    deriv: Optional[ScalarMap]
    m: float
    M: float
    kind: str = "custom"

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"

    def __call__(self, s):
        return self.func(np.asarray(s, dtype=float))


@dataclass(frozen=True, eq=False)
class FeedbackLaw:
    components: tuple
    m: float
    M: float

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def is_linear(self) -> bool:
        return all(c.is_linear for c in self.components)

    @property
    def differentiable(self) -> bool:
        return all(c.deriv is not None for c in self.components)


def _linear():
    return ScalarFeedback(lambda s: s * 1.0, lambda s: np.ones_like(s), 1.0, 1.0, "linear")


def _cubic_near_zero():
    def g(s):
        return np.where(np.abs(s) <= 1.0, s**3, s)

    # one-sided derivative of the outer branch at |s| = 1
    def dg(s):
        return np.where(np.abs(s) < 1.0, 3.0 * s**2, 1.0)

    return ScalarFeedback(g, dg, 1.0, 1.0, "cubic-near-zero")


def _saturating(beta):
    if not 0 <= beta < 1:
        raise ValueError(f"saturating feedback needs 0 <= beta < 1, got {beta}")

    def g(s):
        return (1 - beta) * s + beta * np.tanh(s)

    def dg(s):
        return (1 - beta) + beta * (1.0 - np.tanh(s) ** 2)

    return ScalarFeedback(g, dg, 1 - beta, 1 - beta + beta * np.tanh(1.0), "saturating")


def _sampled_bounds(func, s_max=50.0, count=4001):
    s = np.concatenate([-np.linspace(1.0, s_max, count), np.linspace(1.0, s_max, count)])
    ratio = func(s) / s
    return float(np.min(ratio)), float(np.max(ratio))


def make_feedback(kinds: Union[str, Callable, Sequence] = "linear", n: int = 1, *,
                  beta: float = 0.5, validate_samples: bool = True) -> FeedbackLaw:
    """Componentwise feedback ``g(s) = [g_i(s_i)]`` with growth bounds ``m, M``.

    ``kinds`` is one catalog name (replicated ``n`` times), a callable, or a
    list of either per component. Callables get ``m, M`` from sampling
    ``|s|`` in ``[1, 50]``.
    """
    if isinstance(kinds, str) or callable(kinds):
        kinds = [kinds] * n
    if len(kinds) != n:
        raise ValueError(f"need {n} feedback components, got {len(kinds)}")
    comps = []
    for k in kinds:
        if callable(k):
            m, M = _sampled_bounds(k)
            comps.append(ScalarFeedback(k, None, m, M, "custom"))
        elif k == "linear":
            comps.append(_linear())
        elif k == "cubic-near-zero":
            comps.append(_cubic_near_zero())
        elif k == "saturating":
            comps.append(_saturating(beta))
        else:
            raise ValueError(f"unknown feedback {k!r}; catalog: {', '.join(G_KINDS)}")
    law = FeedbackLaw(tuple(comps), min(c.m for c in comps), max(c.M for c in comps))
    if validate_samples:
        validate(law, (-5.0, 5.0), 1001).raise_for_failure()
    return law


# -- validation --------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    witness: Optional[float] = None
    detail: str = ""
    error: type = KVWaveError


@dataclass
class ValidationReport:
    law_kind: str
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def raise_for_failure(self):
        for c in self.checks:
            if not c.passed:
                raise c.error(f"{self.law_kind}: {c.name} fails at s = {c.witness!r} ({c.detail})",
                              witness=c.witness)

    def __str__(self):
        lines = [f"validation of {self.law_kind}:"]
        for c in self.checks:
            mark = "pass" if c.passed else f"FAIL at s={c.witness!r}"
            lines.append(f"  {c.name:<22} {mark} {c.detail}")
        return "\n".join(lines)


def _first(mask, s):
    bad = np.flatnonzero(~mask)
    return (True, None) if bad.size == 0 else (False, float(s[bad[0]]))


def _validate_f(law: Nonlinearity, s: np.ndarray) -> list:
    fs = law.f(s)
    Fs = law.F(s)
    scale = 1.0 + np.abs(fs * s)
    checks = []
    f0 = float(law.f(np.array(0.0)))
    checks.append(CheckResult("f(0)=0", f0 == 0.0, None if f0 == 0.0 else 0.0,
                              f"f(0) = {f0:g}", SignConditionViolated))
    ok, w = _first(fs * s >= -1e-14 * scale, s)
    detail = "" if ok else f"f(s)s = {float(law.f(w) * w):.6g}"
    checks.append(CheckResult("sign f(s)s >= 0", ok, w, detail, SignConditionViolated))
    ok, w = _first((Fs >= -1e-12 * scale) & (Fs <= fs * s + 1e-12 * scale), s)
    checks.append(CheckResult("0 <= F(s) <= f(s)s", ok, w, "", SignConditionViolated))
    if law.eval_fprime is not None and np.isfinite(law.k0):
        bound = law.k0 * (1 + np.abs(s)) ** (law.p - 1)
        ok, w = _first(np.abs(law.fprime(s)) <= bound * (1 + 1e-12), s)
        checks.append(CheckResult("|f'| <= k0(1+|s|)^(p-1)", ok, w, f"k0 = {law.k0:g}",
                                  GrowthViolated))
    return checks


def _validate_g(law: FeedbackLaw, s: np.ndarray) -> list:
    checks = []
    for i, c in enumerate(law.components):
        tag = f"g_{i + 1}"
        gs = c(s)
        g0 = float(c(np.array(0.0)))
        checks.append(CheckResult(f"{tag}(0)=0", g0 == 0.0, None if g0 == 0.0 else 0.0,
                                  "", NotMonotone))
        order = np.argsort(s)
        steps = np.diff(gs[order])
        bad = np.flatnonzero(steps < 0)
        ok = bad.size == 0
        w = None if ok else float(s[order][bad[0]])
        checks.append(CheckResult(f"{tag} nondecreasing", ok, w, "", NotMonotone))
        nz = s != 0
        ok, w = _first(gs[nz] * s[nz] > 0, s[nz])
        checks.append(CheckResult(f"{tag}(s)s > 0", ok, w, "", NotMonotone))
        far = np.abs(s) >= 1.0
        if np.any(far):
            prod = gs[far] * s[far]
            sq = s[far] ** 2
            tol = 1e-12 * sq
            ok, w = _first((prod >= c.m * sq - tol) & (prod <= c.M * sq + tol), s[far])
            checks.append(CheckResult(f"{tag} m s^2 <= g s <= M s^2", ok, w,
                                      f"m = {c.m:g}, M = {c.M:g}", GrowthBoundViolated))
    return checks


def validate(law: Union[Nonlinearity, FeedbackLaw], sample_range=(-5.0, 5.0),
             sample_count: int = 1000) -> ValidationReport:
    """Check the sampled assumptions of ``law``; failures carry a witness sample."""
    if sample_count < 100:
        raise ValueError(f"sample_count must be >= 100, got {sample_count}")
    lo, hi = sample_range
    s = np.linspace(lo, hi, int(sample_count))
    if isinstance(law, Nonlinearity):
        return ValidationReport(f"f[{law.kind}]", _validate_f(law, s))
    if isinstance(law, FeedbackLaw):
        kinds = ",".join(c.kind for c in law.components)
        return ValidationReport(f"g[{kinds}]", _validate_g(law, s))
    raise TypeError(f"cannot validate {type(law).__name__}")
