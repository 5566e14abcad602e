import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kvwave.discrete_ops import gradient
from kvwave.energy import balance_residual, dissipation_rate, energy
from kvwave.errors import EmptyTrajectory
from kvwave.state import SimState, Trajectory
from kvwave.stepper import StepParams, simulate

from helpers import model_1d, params, sine_state


def test_zero_state_energy():
    m = model_1d()
    z = np.zeros(49)
    e = energy(SimState(0, z, z), m.f, m.grid)
    assert (e.kinetic, e.potential, e.potential_F, e.total) == (0, 0, 0, 0)


def test_sine_potential_energy():
    m = model_1d(n=399)
    e = energy(sine_state(m.grid), m.f, m.grid)
    assert abs(e.total - np.pi**2 / 4) <= 1e-3 * np.pi**2 / 4


def test_unit_velocity_kinetic():
    m = model_1d(n=199)
    e = energy(SimState(0, np.zeros(199), np.ones(199)), m.f, m.grid)
    assert abs(e.kinetic - 0.5) <= 0.01 * 0.5


def test_rates_zero_velocity():
    m = model_1d(eta_shape="constant", eta_value=0.5)
    assert dissipation_rate(SimState(0, np.ones(49), np.zeros(49)), m.grid, m.profile, m.g) == (0, 0)


def test_linear_kv_rate_of_sine():
    m = model_1d(n=199)
    kv, fric = dissipation_rate(sine_state(m.grid, amp=0, v_amp=1), m.grid, m.profile, m.g)
    assert abs(kv - np.pi**2 / 2) <= 0.005 * np.pi**2 / 2 and fric == 0


def test_cubic_kv_rate_small_velocity():
    m = model_1d(n=99, A=[0.3, 0.7], a_shape="bump", eta_shape="collar", g="cubic-near-zero")
    st = sine_state(m.grid, amp=0, v_amp=0.05)
    kv, _ = dissipation_rate(st, m.grid, m.profile, m.g)
    # independent summation: face differences by hand, |dv| < 1 so g(w) w = w^4
    v = np.concatenate([[0.0], st.v, [0.0]])
    h = m.grid.spacing[0]
    w = np.diff(v) / h
    assert np.max(np.abs(w)) < 1
    ref = h * np.sum(m.profile.a_faces[0] * w**4)
    assert abs(kv - ref) <= 1e-10 * max(ref, 1e-300) + 1e-18


def test_conservative_balance():
    m = model_1d(n=99, A="all", a_shape="zero", eta_shape="zero")
    tr = simulate(m, sine_state(m.grid, v_amp=0.3), params(m, solver_tol=1e-13), 10.0)
    assert balance_residual(tr).max <= 1e-10


@pytest.mark.parametrize("A,a_shape,eta_shape", [
    ("empty", "constant", "zero"),
    ([0.3, 0.7], "bump", "collar"),
    ("all", "zero", "window"),
])
def test_linear_balance_exact(A, a_shape, eta_shape):
    m = model_1d(n=99, A=A, a_shape=a_shape, eta_shape=eta_shape, eta_window=[0.4, 0.6],
                 eta_value=0.5)
    tr = simulate(m, sine_state(m.grid, v_amp=0.3), params(m), 5.0)
    rep = balance_residual(tr)
    assert rep.normalized and rep.max <= 1e-10


def balance_orders(g, amp):
    m = model_1d(n=49, A=[0.3, 0.7], a_shape="bump", eta_shape="collar", g=g, f="power")
    st = sine_state(m.grid, amp=amp, v_amp=amp)
    h = m.grid.spacing[0]
    r = [balance_residual(simulate(m, st, StepParams(h * 2.0**-k, solver_tol=1e-13), 1.0)).max
         for k in (0, 1, 2, 3)]
    return np.log2(np.array(r[:-1]) / np.array(r[1:]))


def test_cubic_balance_second_order_in_dt():
    # velocity gradients stay below 1, inside the smooth s**3 branch
    orders = balance_orders("cubic-near-zero", 0.05)
    assert np.all(orders >= 1.9), orders


def test_smooth_saturating_balance_second_order():
    orders = balance_orders("saturating", 1.0)
    assert np.all(orders >= 1.9), orders


def test_cubic_kink_crossing_still_converges():
    # g' jumps at |s| = 1; once gradients cross it the defect is only first order
    orders = balance_orders("cubic-near-zero", 1.0)
    assert np.all(orders >= 0.9), orders


def test_zero_trajectory_absolute_residual():
    m = model_1d(n=19)
    z = np.zeros(19)
    rep = balance_residual(simulate(m, SimState(0, z, z), params(m), 0.5))
    assert not rep.normalized and rep.max == 0


def test_empty_trajectory():
    e = np.array([])
    tr = Trajectory(e, np.zeros((0, 3)), np.zeros((0, 3)), e, e, e, e, e, e, 0.1, 0.5, 1)
    with pytest.raises(EmptyTrajectory):
        balance_residual(tr)


@settings(max_examples=30, deadline=None)
@given(amp=st.floats(0, 3), v_amp=st.floats(0, 3), k=st.integers(1, 5))
def test_parts_nonnegative_and_lower_bound(amp, v_amp, k):
    m = model_1d(n=29, f="power")
    s = sine_state(m.grid, k=k, amp=amp, v_amp=v_amp)
    e = energy(s, m.f, m.grid)
    assert e.kinetic >= 0 and e.potential >= 0 and e.potential_F >= 0
    assert e.total >= e.kinetic + e.potential
    assert e.potential == pytest.approx(
        0.5 * m.grid.cell_volume * np.sum(gradient(s.u, m.grid)[0] ** 2), rel=1e-12, abs=1e-300)
