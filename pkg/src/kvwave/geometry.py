"""Discrete domains, damping-region masks and damping coefficient fields.

The domain is an interval ``(0, L)`` or a rectangle ``(0, Lx) x (0, Ly)`` with
homogeneous Dirichlet data. Unknowns live on the interior nodes of a uniform
grid; gradients live on the cell faces between neighbouring nodes (boundary
faces included, where the outer node value is the Dirichlet zero).

Node ordering is lexicographic with the last axis fastest
(``index = ix * ny + iy``), x-faces are ordered ``fx * ny + iy`` and y-faces
``ix * (ny + 1) + fy``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import (
    EpsTooLarge,
    EtaFloorViolated,
    GeometryError,
    NegativeCoefficient,
    NonPositiveExtent,
    RegionTouchesBoundary,
    TooFewNodes,
)

__all__ = [
    "Grid",
    "RegionMasks",
    "DampingProfile",
    "build_grid",
    "build_regions",
    "build_damping",
    "distance_to_box",
    "distance_to_box_boundary",
]


@dataclass(frozen=True, eq=False)
class Grid:
    dim: int
    extents: tuple
    counts: tuple

    @property
    def spacing(self) -> tuple:
        return tuple(L / (n + 1) for L, n in zip(self.extents, self.counts))

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.counts))

    @property
    def volume(self) -> float:
        """Measure of the continuous domain."""
        return float(np.prod(self.extents))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def axes(self) -> tuple:
        """Interior node coordinates along each axis."""
        return tuple(h * np.arange(1, n + 1) for h, n in zip(self.spacing, self.counts))

    @cached_property
    def face_axes(self) -> tuple:
        """Face coordinates along each axis (``n + 1`` per axis)."""
        return tuple(h * (np.arange(n + 1) + 0.5) for h, n in zip(self.spacing, self.counts))

    @cached_property
    def node_coords(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def face_coords(self) -> tuple:
        """Per axis ``k``: coordinates of the faces normal to axis ``k``."""
        out = []
        for k in range(self.dim):
            per_axis = [self.face_axes[j] if j == k else self.axes[j] for j in range(self.dim)]
            mesh = np.meshgrid(*per_axis, indexing="ij")
            out.append(np.stack([m.ravel() for m in mesh], axis=-1))
        return tuple(out)

    @cached_property
    def cell_measure(self) -> np.ndarray:
        return np.full(self.n_nodes, self.cell_volume)

    @cached_property
    def face_counts(self) -> tuple:
        return tuple(len(c) for c in self.face_coords)

    @cached_property
    def gradient_matrices(self) -> tuple:
        """Sparse one-sided difference matrices, one per axis (faces x nodes)."""
        ones = [sp.identity(n, format="csr") for n in self.counts]
        mats = []
        for k in range(self.dim):
            n, h = self.counts[k], self.spacing[k]
            diff = sp.diags(
                [-np.ones(n), np.ones(n)], [-1, 0], shape=(n + 1, n), format="csr"
            ) / h
            factors = [diff if j == k else ones[j] for j in range(self.dim)]
            mat = factors[0]
            for f in factors[1:]:
                mat = sp.kron(mat, f, format="csr")
            mats.append(mat.tocsr())
        return tuple(mats)

    @cached_property
    def divergence_matrices(self) -> tuple:
        """``-G_k^T`` per axis, so that ``div w = sum_k D_k w_k``."""
        return tuple((-G.T).tocsr() for G in self.gradient_matrices)

    @cached_property
    def laplacian_matrix(self) -> sp.csr_matrix:
        return (-sum(G.T @ G for G in self.gradient_matrices)).tocsr()

    @cached_property
    def boundary_ring(self) -> np.ndarray:
        """Boolean mask of nodes that neighbour the Dirichlet boundary."""
        idx = np.indices(self.counts).reshape(self.dim, -1)
        ring = np.zeros(self.n_nodes, dtype=bool)
        for k, n in enumerate(self.counts):
            ring |= (idx[k] == 0) | (idx[k] == n - 1)
        return ring


def build_grid(dim: int, extents: Sequence[float], counts: Sequence[int]) -> Grid:
    """Uniform grid of interior nodes with spacing ``extent / (count + 1)``.

    Examples
    --------
    >>> g = build_grid(1, [1.0], [3])
    >>> g.spacing, g.axes[0].tolist()
    ((0.25,), [0.25, 0.5, 0.75])
    """
    if dim not in (1, 2):
        raise GeometryError(f"dim must be 1 or 2, got {dim!r}")
    extents = tuple(float(e) for e in np.atleast_1d(extents))
    counts = tuple(int(c) for c in np.atleast_1d(counts))
    if len(extents) != dim or len(counts) != dim:
        raise GeometryError(f"need {dim} extents and counts, got {extents} / {counts}")
    for e in extents:
        if not np.isfinite(e) or e <= 0:
            raise NonPositiveExtent(f"extent must be positive, got {e}")
    for c in counts:
        if c < 3:
            raise TooFewNodes(f"need at least 3 interior nodes per axis, got {c}")
    return Grid(dim, extents, counts)


# -- regions -----------------------------------------------------------------

def distance_to_box(points, lo, hi) -> np.ndarray:
    """Euclidean distance from points ``(N, d)`` to the closed box; 0 inside."""
    points = np.atleast_2d(points)
    gap = np.maximum(np.maximum(lo - points, points - hi), 0.0)
    return np.sqrt(np.sum(gap**2, axis=1))


def distance_to_box_boundary(points, lo, hi) -> np.ndarray:
    """Distance from points to the boundary of the box."""
    points = np.atleast_2d(points)
    inside = np.all((points >= lo) & (points <= hi), axis=1)
    depth = np.min(np.minimum(points - lo, hi - points), axis=1)
    return np.where(inside, depth, distance_to_box(points, lo, hi))


ASpec = Union[None, str, Sequence]


@dataclass(frozen=True, eq=False)
class RegionMasks:
    """Node masks of the undamped set ``A`` and its derived regions.

    ``O_eps`` is the eps-neighbourhood of the boundary of ``A`` and ``V`` the
    part of ``A`` farther than ``eps/2`` from that boundary. ``kind`` is
    ``"box"``, ``"empty"`` (KV damping on the whole domain) or ``"all"``
    (no KV damping).
    """

    kind: str
    eps: float
    box_lo: np.ndarray | None
    box_hi: np.ndarray | None
    mask_A: np.ndarray
    mask_omega: np.ndarray
    mask_O_eps: np.ndarray
    mask_V: np.ndarray
    face_mask_A: tuple = field(repr=False)

    def distance_to_A(self, points) -> np.ndarray:
        if self.kind == "all":
            return np.zeros(len(np.atleast_2d(points)))
        if self.kind == "empty":
            return np.full(len(np.atleast_2d(points)), np.inf)
        return distance_to_box(points, self.box_lo, self.box_hi)

    def distance_to_boundary_of_A(self, points) -> np.ndarray:
        if self.kind != "box":
            return np.full(len(np.atleast_2d(points)), np.inf)
        return distance_to_box_boundary(points, self.box_lo, self.box_hi)


def _parse_box(grid: Grid, A_spec) -> tuple:
    arr = np.asarray(A_spec, dtype=float)
    if grid.dim == 1 and arr.shape == (2,):
        arr = arr.reshape(1, 2)
    if arr.shape != (grid.dim, 2):
        raise GeometryError(f"A_spec must be {grid.dim} [lo, hi] pairs, got {A_spec!r}")
    lo, hi = arr[:, 0], arr[:, 1]
    if np.any(hi <= lo):
        raise GeometryError(f"A_spec needs a non-empty interior, got {A_spec!r}")
    return lo, hi


def build_regions(grid: Grid, A_spec: ASpec, eps: float) -> RegionMasks:
    """Rasterize the undamped set ``A`` and the derived regions onto ``grid``.

    ``A_spec`` is ``[lo, hi]`` (1D) or ``[[x0, x1], [y0, y1]]`` (2D) for a
    closed box strictly inside the domain, ``"empty"``/``None`` for no
    undamped set, or ``"all"`` for the whole domain.
    A node belongs to a set iff its coordinate does.
    """
    x = grid.node_coords
    n = grid.n_nodes
    eps = float(eps)
    if A_spec is None or (isinstance(A_spec, str) and A_spec in ("empty", "none")):
        none = np.zeros(n, dtype=bool)
        return RegionMasks(
            "empty", eps, None, None, none, ~none, none.copy(), none.copy(),
            tuple(np.zeros(c, dtype=bool) for c in grid.face_counts),
        )
    if isinstance(A_spec, str) and A_spec == "all":
        full = np.ones(n, dtype=bool)
        return RegionMasks(
            "all", eps, None, None, full, ~full, np.zeros(n, dtype=bool), full.copy(),
            tuple(np.ones(c, dtype=bool) for c in grid.face_counts),
        )
    if isinstance(A_spec, str):
        raise GeometryError(f"unknown region spec {A_spec!r}")

    lo, hi = _parse_box(grid, A_spec)
    ext = np.asarray(grid.extents)
    if np.any(lo <= 0) or np.any(hi >= ext):
        raise RegionTouchesBoundary(f"A = {A_spec!r} must lie strictly inside the domain")
    gap = float(min(np.min(lo), np.min(ext - hi)))
    if not 0 < eps < gap:
        raise EpsTooLarge(f"need 0 < eps < dist(boundary of A, boundary of domain) = {gap:g}, got {eps:g}")

    inside = np.all((x >= lo) & (x <= hi), axis=1)
    dist_bd = distance_to_box_boundary(x, lo, hi)
    face_A = tuple(
        np.all((fc >= lo) & (fc <= hi), axis=1) for fc in grid.face_coords
    )
    return RegionMasks(
        kind="box",
        eps=eps,
        box_lo=lo,
        box_hi=hi,
        mask_A=inside,
        mask_omega=~inside,
        mask_O_eps=dist_bd < eps,
        mask_V=inside & (dist_bd > eps / 2),
        face_mask_A=face_A,
    )


# -- damping coefficients ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class DampingProfile:
    a_faces: tuple
    eta_nodes: np.ndarray
    eta_0: float
    a_sup: float
    gcc_satisfied: bool

    @property
    def has_damping(self) -> bool:
        return bool(any(np.any(a > 0) for a in self.a_faces) or np.any(self.eta_nodes > 0))


Shape = Union[str, Callable[[np.ndarray], np.ndarray]]


def _a_values(points, masks: RegionMasks, shape: Shape, a_max: float, d_max: float) -> np.ndarray:
    if callable(shape):
        vals = np.asarray(shape(points), dtype=float)
    elif shape == "zero":
        vals = np.zeros(len(points))
    elif shape == "constant":
        vals = np.full(len(points), a_max)
    elif shape == "bump":
        d = masks.distance_to_A(points)
        vals = a_max * np.minimum(d / d_max, 1.0) ** 2
    else:
        raise GeometryError(f"unknown a_shape {shape!r}; expected bump, constant, zero or a callable")
    return vals


def _eta_values(points, masks: RegionMasks, shape: Shape, value: float, window) -> np.ndarray:
    if callable(shape):
        return np.asarray(shape(points), dtype=float)
    if shape == "zero":
        return np.zeros(len(points))
    if shape == "constant":
        return np.full(len(points), value)
    if shape == "collar":
        d = masks.distance_to_boundary_of_A(points)
        return value * np.clip(2.0 - d / masks.eps, 0.0, 1.0)
    if shape == "window":
        if window is None:
            raise GeometryError("eta_shape 'window' needs eta_window")
        w = np.asarray(window, dtype=float).reshape(-1, 2)
        lo, hi = w[:, 0], w[:, 1]
        return np.where(np.all((points > lo) & (points < hi), axis=1), value, 0.0)
    raise GeometryError(f"unknown eta_shape {shape!r}; expected collar, constant, window, zero or a callable")


def build_damping(
    grid: Grid,
    masks: RegionMasks,
    a_shape: Shape = "bump",
    eta_shape: Shape = "collar",
    *,
    a_max: float = 1.0,
    d_max: float | None = None,
    eta_0: float = 0.1,
    eta_value: float | None = None,
    eta_window=None,
) -> DampingProfile:
    """Sample ``a`` on faces and ``eta`` on nodes and check their assumptions.

    ``a_shape="bump"`` is ``a_max * min(dist(x, A) / d_max, 1)**2``, which is
    continuous on the closure of omega and vanishes on ``A``. ``d_max``
    defaults to the gap between ``A`` and the outer boundary.
    ``eta_shape="collar"`` equals ``eta_value`` (default ``eta_0``) on
    ``O_eps`` and falls linearly to zero at distance ``2 eps`` from the
    boundary of ``A``.

    ``gcc_satisfied`` is a sufficient boundary-collar test: every node next to
    the outer boundary is in omega and ``a > 0`` on all faces touching those
    nodes. It is exact in 1D.
    """
    if a_max < 0:
        raise NegativeCoefficient(f"a_max must be nonnegative, got {a_max}")
    if eta_value is None:
        eta_value = eta_0
    if d_max is None:
        if masks.kind == "box":
            ext = np.asarray(grid.extents)
            d_max = float(min(np.min(masks.box_lo), np.min(ext - masks.box_hi)))
        else:
            d_max = 1.0
    if d_max <= 0:
        raise GeometryError(f"d_max must be positive, got {d_max}")

    a_faces = []
    for k, fc in enumerate(grid.face_coords):
        a = _a_values(fc, masks, a_shape, a_max, d_max)
        # a vanishes identically on A (it defines A)
        a = np.where(masks.face_mask_A[k], 0.0, a)
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            bad = int(np.argmin(np.nan_to_num(a, nan=-np.inf)))
            raise NegativeCoefficient("a(x) must be finite and nonnegative", witness=fc[bad])
        a_faces.append(a)
    eta = _eta_values(grid.node_coords, masks, eta_shape, eta_value, eta_window)
    if np.any(eta < 0) or not np.all(np.isfinite(eta)):
        raise NegativeCoefficient("eta(x) must be finite and nonnegative")

    if np.any(masks.mask_O_eps):
        if not eta_0 > 0:
            raise EtaFloorViolated(f"eta_0 must be positive when O_eps is non-empty, got {eta_0}")
        low = masks.mask_O_eps & (eta < eta_0)
        if np.any(low):
            j = int(np.flatnonzero(low)[0])
            raise EtaFloorViolated(
                f"eta = {eta[j]:g} < eta_0 = {eta_0:g} at x = {grid.node_coords[j].tolist()} in O_eps",
                witness=grid.node_coords[j],
            )

    ring = grid.boundary_ring
    gcc = bool(np.all(masks.mask_omega[ring]))
    if gcc:
        for G, a in zip(grid.gradient_matrices, a_faces):
            touching = np.asarray(abs(G) @ ring.astype(float)).ravel() > 0
            gcc = gcc and bool(np.all(a[touching] > 0))

    a_sup = float(max(np.max(a) for a in a_faces))
    return DampingProfile(tuple(a_faces), eta, float(eta_0), a_sup, gcc)
