"""Staggered finite-difference algebra with Dirichlet zero boundary values.

Nodal fields are arrays of length ``grid.n_nodes``; face fields are tuples with
one array per axis. Both carry the same quadrature weight ``prod(h)``, which
makes ``divergence = -gradient^T`` and the summation-by-parts identity

    <gradient(u), w>_faces + <u, divergence(w)>_nodes = 0

exact up to roundoff. Any trailing axis is treated as a batch of fields.
"""
from __future__ import annotations

from typing import Tuple

import numpy as np

from .geometry import Grid

__all__ = [
    "gradient",
    "divergence",
    "laplacian",
    "integrate",
    "inner_nodes",
    "inner_faces",
    "damping_operator",
]

FaceField = Tuple[np.ndarray, ...]


def _broadcast(coef, like):
    coef = np.asarray(coef)
    return coef.reshape(coef.shape + (1,) * (np.ndim(like) - coef.ndim))


def gradient(u: np.ndarray, grid: Grid) -> FaceField:
    """Face differences ``(u_right - u_left) / h_k`` per axis."""
    return tuple(G @ u for G in grid.gradient_matrices)


def divergence(w: FaceField, grid: Grid) -> np.ndarray:
    """Negative adjoint of :func:`gradient` under the grid inner products."""
    mats = grid.divergence_matrices
    if len(w) != len(mats):
        raise ValueError(f"face field has {len(w)} components, grid has {len(mats)} axes")
    out = mats[0] @ w[0]
    for D, wk in zip(mats[1:], w[1:]):
        out = out + D @ wk
    return out


def laplacian(u: np.ndarray, grid: Grid) -> np.ndarray:
    """``divergence(gradient(u))``: the (2n+1)-point Dirichlet Laplacian."""
    return grid.laplacian_matrix @ u


def integrate(field, grid: Grid):
    """Quadrature ``sum(values) * prod(h)``; face tuples are summed over axes."""
    if isinstance(field, tuple):
        return sum(integrate(w, grid) for w in field)
    return np.sum(field, axis=0) * grid.cell_volume


def inner_nodes(u, v, grid: Grid):
    return integrate(u * v, grid)


def inner_faces(w1: FaceField, w2: FaceField, grid: Grid):
    return sum(integrate(a * b, grid) for a, b in zip(w1, w2))


def damping_operator(v, grid: Grid, profile, g) -> np.ndarray:
    """``B_h(v) = -divergence(a * g(gradient(v))) + eta * v``.

    ``profile`` provides ``a_faces`` and ``eta_nodes``; ``g`` is a
    :class:`~kvwave.constitutive.FeedbackLaw` applied componentwise per axis.
    """
    grads = gradient(v, grid)
    flux = tuple(_broadcast(a, w) * comp(w)
                 for a, w, comp in zip(profile.a_faces, grads, g.components))
    return -divergence(flux, grid) + _broadcast(profile.eta_nodes, v) * v
