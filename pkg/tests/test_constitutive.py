import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from kvwave.constitutive import make_feedback, make_nonlinearity, validate
from kvwave.errors import (
    GrowthBoundViolated,
    NotMonotone,
    SignConditionViolated,
    SupercriticalExponent,
)

finite = st.floats(-5, 5, allow_nan=False)


def test_power_three_supercritical_in_3d():
    with pytest.raises(SupercriticalExponent):
        make_nonlinearity("power", p=3, ambient_dim=3)
    make_nonlinearity("power", p=2.9, ambient_dim=3)


def test_zero_law():
    f = make_nonlinearity("zero")
    s = np.linspace(-3, 3, 7)
    assert np.all(f.f(s) == 0) and np.all(f.F(s) == 0) and np.all(f.fprime(s) == 0)
    assert validate(f).ok


def test_cubic_antiderivative_values():
    f = make_nonlinearity("power", p=3, ambient_dim=2)
    assert float(f.F(2.0)) == 4.0
    assert float(f.f(2.0) * 2.0) == 16.0


def test_cubic_passes_on_standard_range():
    rep = validate(make_nonlinearity("power", p=3), (-5, 5), 1000)
    assert rep.ok, str(rep)


def test_sign_condition_witness():
    law = make_nonlinearity("custom", f=lambda s: s**3 - s, p=3, validate_samples=False)
    rep = validate(law, (0.5, 0.9), 100)
    assert not rep.ok
    (fail,) = [c for c in rep.failures if c.name.startswith("sign")]
    assert fail.witness == 0.5
    assert float(law.f(0.5) * 0.5) == pytest.approx(-0.1875)
    with pytest.raises(SignConditionViolated):
        rep.raise_for_failure()
    with pytest.raises(SignConditionViolated):
        make_nonlinearity("custom", f=lambda s: s**3 - s, p=3)


def test_linear_feedback_bounds():
    g = make_feedback("linear")
    assert (g.m, g.M) == (1.0, 1.0)
    assert validate(g, (-5, 5), 1000).ok


def test_cubic_near_zero_shape():
    g = make_feedback("cubic-near-zero").components[0]
    s = np.array([-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0])
    np.testing.assert_array_equal(g(s), [-2.0, -1.0, -0.125, 0.0, 0.125, 1.0, 2.0])
    assert (g.m, g.M) == (1.0, 1.0)


def test_decreasing_feedback_rejected():
    with pytest.raises(NotMonotone):
        make_feedback(lambda s: -s)


def test_growth_bound_violation_reported():
    from kvwave.constitutive import FeedbackLaw, ScalarFeedback
    comp = ScalarFeedback(lambda s: s**3, lambda s: 3 * s**2, 1.0, 1.0)
    rep = validate(FeedbackLaw((comp,), 1.0, 1.0), (-3, 3), 200)
    with pytest.raises(GrowthBoundViolated):
        rep.raise_for_failure()


def test_saturating_bounds_hold():
    g = make_feedback("saturating", beta=0.5)
    assert 0 < g.m <= g.M
    assert validate(g, (-20, 20), 2000).ok


def test_cubic_clipped_continuous():
    f = make_nonlinearity("cubic-clipped", clip=1.5)
    eps = 1e-9
    assert abs(float(f.f(1.5 + eps) - f.f(1.5 - eps))) < 1e-7
    assert validate(f).ok


@pytest.mark.parametrize("law", [
    make_nonlinearity("power", p=3),
    make_nonlinearity("power", p=1.5),
    make_nonlinearity("cubic-clipped", clip=0.7),
])
@settings(max_examples=40, deadline=None)
@given(s=finite)
def test_antiderivative_matches_quadrature(law, s):
    ref, _ = quad(lambda r: float(law.f(r)), 0.0, s, epsabs=1e-12, epsrel=1e-10)
    assert abs(float(law.F(s)) - ref) <= 1e-8


def test_custom_F_uses_quadrature():
    law = make_nonlinearity("custom", f=lambda s: np.sinh(s), p=1, validate_samples=False)
    assert float(law.F(1.0)) == pytest.approx(np.cosh(1.0) - 1.0, abs=1e-10)


def test_lipschitz_constant_fitted_once():
    law = make_nonlinearity("power", p=3)
    rng = np.random.default_rng(3)
    a, b = rng.uniform(-5, 5, (2, 20000))
    ratio = np.abs(law.f(a) - law.f(b)) / ((1 + np.abs(a) ** 2 + np.abs(b) ** 2) * np.abs(a - b))
    C = ratio.max()
    c, d = rng.uniform(-5, 5, (2, 20000))
    bound = C * (1 + np.abs(c) ** 2 + np.abs(d) ** 2) * np.abs(c - d)
    assert np.all(np.abs(law.f(c) - law.f(d)) <= 1.5 * bound + 1e-12)


@pytest.mark.parametrize("kind", ["linear", "cubic-near-zero", "saturating"])
@settings(max_examples=60, deadline=None)
@given(s1=finite, s2=finite)
def test_feedback_monotone_pairs(kind, s1, s2):
    g = make_feedback(kind).components[0]
    assert (float(g(s1)) - float(g(s2))) * (s1 - s2) >= 0


def test_componentwise_kinds():
    g = make_feedback(["linear", "saturating"], n=2)
    assert g.n == 2 and g.m == pytest.approx(0.5) and g.M == 1.0
