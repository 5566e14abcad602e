"""Scenario builders shared by the test modules."""
import numpy as np

from kvwave.constitutive import make_feedback, make_nonlinearity
from kvwave.geometry import build_damping, build_grid, build_regions
from kvwave.state import SimState
from kvwave.stepper import StepParams, WaveModel, default_dt


def model_1d(n=49, A="empty", a_shape="constant", eta_shape="zero", g="linear", f="zero",
             eps=0.05, **kw):
    grid = build_grid(1, [1.0], [n])
    masks = build_regions(grid, A, eps)
    prof = build_damping(grid, masks, a_shape, eta_shape, **kw)
    return WaveModel(grid, prof, make_nonlinearity(f), make_feedback(g))


def model_2d(n=(12, 12), A="empty", a_shape="constant", eta_shape="zero", g="linear",
             f="zero", eps=0.05, **kw):
    grid = build_grid(2, [1.0, 1.0], list(n))
    masks = build_regions(grid, A, eps)
    prof = build_damping(grid, masks, a_shape, eta_shape, **kw)
    return WaveModel(grid, prof, make_nonlinearity(f), make_feedback(g, n=2))


def sine_state(grid, k=1, amp=1.0, v_amp=0.0):
    shape = np.prod([np.sin(k * np.pi * grid.node_coords[:, i] / grid.extents[i])
                     for i in range(grid.dim)], axis=0)
    return SimState(0.0, amp * shape, v_amp * shape)


def params(model, **kw):
    return StepParams(kw.pop("dt", default_dt(model.grid)), **kw)


def modal_q(T, a0, eta, k=1):
    """High-accuracy oracle for q'' + (a0 k^2 pi^2 + eta) q' + k^2 pi^2 q = 0, q(0)=1, q'(0)=0."""
    from scipy.integrate import solve_ivp
    lam = (k * np.pi) ** 2
    sol = solve_ivp(lambda t, y: [y[1], -(a0 * lam + eta) * y[1] - lam * y[0]], (0, T),
                    [1.0, 0.0], method="DOP853", rtol=1e-13, atol=1e-15)
    return sol.y[0, -1]


def order_study(counts=(9, 19, 39, 79), T=1.0, a0=0.2, eta=0.1):
    """Observed orders of the L2 error of u(T) under simultaneous (h, dt) halving."""
    from kvwave.discrete_ops import integrate
    from kvwave.stepper import simulate
    q = modal_q(T, a0, eta)
    errs = []
    for n in counts:
        m = model_1d(n=n, A="empty", a_shape="constant", eta_shape="constant", a_max=a0,
                      eta_value=eta)
        h = m.grid.spacing[0]
        tr = simulate(m, sine_state(m.grid), StepParams(0.5 * h, solver_tol=1e-13), T)
        exact = q * np.sin(np.pi * m.grid.node_coords[:, 0])
        errs.append(np.sqrt(integrate((tr.u[-1] - exact) ** 2, m.grid)))
    errs = np.array(errs)
    return np.log2(errs[:-1] / errs[1:])
