import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from kvwave.constitutive import make_feedback
from kvwave.discrete_ops import (
    damping_operator,
    divergence,
    gradient,
    inner_faces,
    inner_nodes,
    integrate,
    laplacian,
)
from kvwave.geometry import build_damping, build_grid, build_regions

G1 = build_grid(1, [1.0], [5])
G2 = build_grid(2, [1.0, 0.8], [4, 3])


def test_gradient_of_zero():
    assert all(np.all(w == 0) for w in gradient(np.zeros(G2.n_nodes), G2))


def test_gradient_of_clipped_ramp():
    g = build_grid(1, [1.0], [3])
    (w,) = gradient(np.array([0.25, 0.5, 0.75]), g)
    np.testing.assert_allclose(w, [1.0, 1.0, 1.0, -3.0])


@pytest.mark.parametrize("grid", [G1, G2])
def test_gradient_of_indicator(grid):
    j = grid.n_nodes // 2
    u = np.zeros(grid.n_nodes)
    u[j] = 1.0
    for w, h in zip(gradient(u, grid), grid.spacing):
        nz = w[w != 0]
        assert len(nz) == 2
        np.testing.assert_allclose(sorted(nz), [-1 / h, 1 / h])


def test_divergence_of_zero():
    assert np.all(divergence(tuple(np.zeros(c) for c in G2.face_counts), G2) == 0)


def test_divergence_of_constant_vanishes():
    # boundary faces are part of the layout, so a constant flux has no net
    # divergence anywhere (the adjoint of a gradient that sees the Dirichlet zeros)
    for grid in (G1, G2):
        w = tuple(np.full(c, 2.5) for c in grid.face_counts)
        np.testing.assert_allclose(divergence(w, grid), 0.0, atol=1e-12)


def test_adjointness_five_nodes():
    rng = np.random.default_rng(0)
    u = rng.standard_normal(5)
    w = (rng.standard_normal(6),)
    lhs = inner_faces(gradient(u, G1), w, G1)
    rhs = -inner_nodes(u, divergence(w, G1), G1)
    assert abs(lhs - rhs) <= 1e-14 * max(1.0, abs(lhs))


def field(n):
    return arrays(np.float64, n, elements=st.floats(-10, 10, allow_nan=False))


@settings(max_examples=50, deadline=None)
@given(u=field(G2.n_nodes), wx=field(G2.face_counts[0]), wy=field(G2.face_counts[1]))
def test_summation_by_parts(u, wx, wy):
    w = (wx, wy)
    a = inner_faces(gradient(u, G2), w, G2)
    b = inner_nodes(u, divergence(w, G2), G2)
    scale = np.sqrt(inner_faces(w, w, G2)) * np.sqrt(
        inner_faces(gradient(u, G2), gradient(u, G2), G2)) + 1e-300
    assert abs(a + b) <= 1e-12 * scale + 1e-300


@settings(max_examples=50, deadline=None)
@given(u=field(G2.n_nodes), v=field(G2.n_nodes))
def test_laplacian_symmetric_negative(u, v):
    Lu, Lv = laplacian(u, G2), laplacian(v, G2)
    scale = 1 + np.abs(Lu).sum() * np.abs(v).sum() * G2.cell_volume
    assert inner_nodes(Lu, u, G2) <= 1e-12 * scale
    assert abs(inner_nodes(Lu, v, G2) - inner_nodes(u, Lv, G2)) <= 1e-12 * scale


def test_laplacian_is_div_grad():
    rng = np.random.default_rng(1)
    u = rng.standard_normal(G2.n_nodes)
    np.testing.assert_allclose(laplacian(u, G2), divergence(gradient(u, G2), G2), atol=1e-10)


def test_laplacian_sine_1d():
    g = build_grid(1, [1.0], [199])
    x = g.node_coords[:, 0]
    u = np.sin(np.pi * x)
    h = g.spacing[0]
    lam = (2 / h**2) * (1 - np.cos(np.pi * h))
    np.testing.assert_allclose(laplacian(u, g), -lam * u, rtol=1e-9, atol=1e-9)
    assert abs(lam - np.pi**2) / np.pi**2 <= 1e-4


def test_laplacian_sine_2d():
    g = build_grid(2, [1.0, 1.0], [49, 49])
    x, y = g.node_coords.T
    u = np.sin(np.pi * x) * np.sin(np.pi * y)
    ratio = inner_nodes(laplacian(u, g), u, g) / inner_nodes(u, u, g)
    assert abs(ratio + 2 * np.pi**2) <= 0.005 * 2 * np.pi**2


def test_integrate_constant():
    g = build_grid(1, [1.0], [199])
    assert integrate(np.ones(199), g) == pytest.approx(0.995, abs=1e-13)
    assert integrate(np.zeros(199), g) == 0.0


def test_integrate_sine_second_order():
    errs = []
    for n in (9, 19, 39, 79):
        g = build_grid(1, [1.0], [n])
        errs.append(abs(integrate(np.sin(np.pi * g.node_coords[:, 0]), g) - 2 / np.pi))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


@pytest.mark.parametrize("kind", ["linear", "cubic-near-zero", "saturating"])
@pytest.mark.parametrize("grid", [build_grid(1, [1.0], [40]), build_grid(2, [1.0, 1.0], [12, 10])])
def test_damping_operator_monotone(kind, grid):
    spec = [0.3, 0.7] if grid.dim == 1 else [[0.3, 0.7], [0.3, 0.7]]
    m = build_regions(grid, spec, 0.1)
    p = build_damping(grid, m)
    g = make_feedback(kind, n=grid.dim)
    rng = np.random.default_rng(5)
    v1 = rng.standard_normal((grid.n_nodes, 300)) * rng.uniform(0.01, 3, 300)
    v2 = rng.standard_normal((grid.n_nodes, 300)) * rng.uniform(0.01, 3, 300)
    d = damping_operator(v1, grid, p, g) - damping_operator(v2, grid, p, g)
    assert np.min(integrate(d * (v1 - v2), grid)) >= -1e-12
