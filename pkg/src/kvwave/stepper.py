"""Implicit theta-scheme for the damped semilinear wave equation.

The first-order system ``u' = v``, ``v' = Lap u + div(a g(grad v)) - eta v - f(u)``
is advanced with the theta rule. The unknown of each step is the new velocity
``v``; the new displacement is ``u_hat + c v`` with ``c = theta dt`` and
``u_hat = u_n + (1 - theta) dt v_n``. Substituting gives the resolvent problem

    v + c^2 (-Lap) v + c B_h(v) + c f(u_hat + c v) = rhs,

with ``B_h`` the monotone discrete damping operator, so the root is unique
whenever ``f`` is nondecreasing.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import discrete_ops as ops
from .energy import _rates, energy, observability_density
from .errors import NonFiniteState, SolverDiverged
from .state import SimState, Trajectory

__all__ = [
    "StepParams",
    "WaveModel",
    "ThetaStepper",
    "StepInfo",
    "kv_force",
    "residual",
    "solve_step",
    "simulate",
    "default_dt",
]

log = logging.getLogger(__name__)

SOLVER_KINDS = ("newton", "fixed-point")


@dataclass(frozen=True)
class StepParams:
    dt: float
    theta: float = 0.5
    solver_tol: float = 1e-10
    max_iters: int = 50
    solver_kind: str = "newton"

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [1/2, 1], got {self.theta}")
        if not self.solver_tol > 0:
            raise ValueError(f"solver_tol must be positive, got {self.solver_tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.solver_kind not in SOLVER_KINDS:
            raise ValueError(f"solver_kind must be one of {SOLVER_KINDS}, got {self.solver_kind!r}")


def default_dt(grid) -> float:
    return 0.5 * min(grid.spacing)


@dataclass(frozen=True, eq=False)
class WaveModel:
    """Grid, damping coefficients and constitutive laws of one scenario."""

    grid: object
    profile: object
    f: object
    g: object

    def __post_init__(self):
        if self.g.n != self.grid.dim:
            raise ValueError(f"feedback has {self.g.n} components but the grid is {self.grid.dim}D")


@dataclass(frozen=True)
class StepInfo:
    iterations: int
    residual_norm: float
    method: str


def kv_force(v, grid, profile, g) -> np.ndarray:
    """``div(a g(grad v))`` with ``g`` applied per axis."""
    grads = ops.gradient(v, grid)
    flux = tuple(a * comp(w) for a, w, comp in zip(profile.a_faces, grads, g.components))
    return ops.divergence(flux, grid)


def _f_is_linear(f) -> bool:
    return f.is_zero or (f.kind == "power" and f.p == 1.0)


class ThetaStepper:
    """Reusable stepper; caches operators and, for linear laws, the factorization."""

    def __init__(self, model: WaveModel, params: StepParams):
        self.model = model
        self.params = params
        grid = model.grid
        self.grid = grid
        self.lap = grid.laplacian_matrix
        self.grads = grid.gradient_matrices
        self.a = model.profile.a_faces
        self.eta = model.profile.eta_nodes
        self.c = params.theta * params.dt
        self.weight = grid.cell_volume
        self.n = grid.n_nodes
        self.linear = model.g.is_linear and _f_is_linear(model.f)
        self.use_newton = (params.solver_kind == "newton" and model.g.differentiable
                           and model.f.eval_fprime is not None)
        self._lu = None

    # -- residual pieces -------------------------------------------------

    def norm(self, x) -> float:
        return float(np.sqrt(np.sum(x * x) * self.weight))

    def kv(self, v):
        return kv_force(v, self.grid, self.model.profile, self.model.g)

    def rhs(self, u, v):
        """Right-hand side of the velocity equation."""
        return self.lap @ u + self.kv(v) - self.eta * v - self.model.f.f(u)

    def _prepare(self, state: SimState):
        p = self.params
        explicit = self.rhs(state.u, state.v) if p.theta < 1.0 else np.zeros(self.n)
        u_hat = state.u + (1.0 - p.theta) * p.dt * state.v
        base = state.v + (1.0 - p.theta) * p.dt * explicit
        return u_hat, base

    def _residual(self, v, u_hat, base):
        u_new = u_hat + self.c * v
        return v - base - self.c * self.rhs(u_new, v)

    def residual(self, v_next, state: SimState):
        u_hat, base = self._prepare(state)
        return self._residual(np.asarray(v_next, dtype=float), u_hat, base)

    # -- linearizations --------------------------------------------------

    def _build_pattern(self):
        """Fixed CSC pattern of ``diag + L + sum_k G_k^T diag(.) G_k``.

        ``_coef_maps[k]`` maps a face coefficient vector to the pattern data of
        ``G_k^T diag(coef) G_k``; ``_diag_pos`` and ``_lap_data`` place the
        diagonal and the Laplacian.
        """
        n = self.n
        skel = sp.identity(n, format="csc") + abs(self.lap)
        for G in self.grads:
            skel = skel + abs(G.T) @ abs(G)
        skel = skel.tocsc()
        skel.sort_indices()
        skel.sum_duplicates()
        nnz = skel.nnz
        lookup = sp.csc_matrix((np.arange(1, nnz + 1, dtype=float), skel.indices, skel.indptr),
                               shape=(n, n))

        def positions(rows, cols):
            return np.asarray(lookup[rows, cols]).ravel().astype(np.int64) - 1

        self._indices, self._indptr = skel.indices.copy(), skel.indptr.copy()
        self._nnz = nnz
        diag = np.arange(n)
        self._diag_pos = positions(diag, diag)
        lap = self.lap.tocoo()
        self._lap_data = np.zeros(nnz)
        np.add.at(self._lap_data, positions(lap.row, lap.col), lap.data)
        maps = []
        for G in self.grads:
            Gc = G.tocoo()
            # entries (i, j, face) of G^T diag(e_face) G
            by_face = {}
            for f, j, val in zip(Gc.row, Gc.col, Gc.data):
                by_face.setdefault(f, []).append((j, val))
            rows, cols, faces, vals = [], [], [], []
            for f, entries in by_face.items():
                for i, vi in entries:
                    for j, vj in entries:
                        rows.append(i)
                        cols.append(j)
                        faces.append(f)
                        vals.append(vi * vj)
            pos = positions(np.array(rows), np.array(cols))
            maps.append(sp.csr_matrix((vals, (pos, faces)), shape=(nnz, G.shape[0])))
        self._coef_maps = maps

    def _assemble(self, diag, coefs):
        if not hasattr(self, "_coef_maps"):
            self._build_pattern()
        data = -self.c**2 * self._lap_data
        data[self._diag_pos] += diag
        for M, cf in zip(self._coef_maps, coefs):
            data = data + self.c * (M @ cf)
        return sp.csc_matrix((data, self._indices, self._indptr), shape=(self.n, self.n))

    def jacobian(self, v, u_hat):
        g = self.model.g
        coefs = [a * comp.deriv(G @ v) for a, G, comp in zip(self.a, self.grads, g.components)]
        diag = 1.0 + self.c * self.eta
        if not self.model.f.is_zero:
            diag = diag + self.c**2 * self.model.f.fprime(u_hat + self.c * v)
        return self._assemble(diag, coefs)

    def _secant_matrix(self, v):
        coefs = []
        for a, G, comp in zip(self.a, self.grads, self.model.g.components):
            w = G @ v
            w_safe = np.where(np.abs(w) < 1e-12, 1e-12, w)
            coefs.append(a * comp(w_safe) / w_safe)
        return self._assemble(1.0 + self.c * self.eta, coefs)

    # -- solvers ---------------------------------------------------------

    def _converged(self, r_norm, v):
        return r_norm <= self.params.solver_tol * (1.0 + self.norm(v))

    def _newton(self, v, u_hat, base):
        p = self.params
        r = self._residual(v, u_hat, base)
        r_norm = self.norm(r)
        lu = None
        for it in range(p.max_iters + 1):
            if self._converged(r_norm, v):
                if lu is not None and not self.linear:
                    v, r_norm = self._polish(lu, v, r, r_norm, u_hat, base)
                return v, StepInfo(it, r_norm, "newton")
            if it == p.max_iters:
                break
            if self.linear:
                if self._lu is None:
                    self._lu = splu(self.jacobian(v, u_hat))
                lu = self._lu
            else:
                lu = splu(self.jacobian(v, u_hat))
            delta = lu.solve(r)
            lam = 1.0
            for _ in range(40):
                v_try = v - lam * delta
                r_try = self._residual(v_try, u_hat, base)
                n_try = self.norm(r_try)
                if np.isfinite(n_try) and (n_try < r_norm or self._converged(n_try, v_try)):
                    break
                lam *= 0.5
            else:
                log.debug("newton line search stalled at residual %.3e; switching to fixed point", r_norm)
                return self._fixed_point(v, u_hat, base)
            v, r, r_norm = v_try, r_try, n_try
        raise SolverDiverged(
            f"newton did not reach tol {p.solver_tol:g} in {p.max_iters} iterations "
            f"(residual {r_norm:.3e})", residual_norm=r_norm, iterations=p.max_iters)

    def _polish(self, lu, v, r, r_norm, u_hat, base):
        # the relative stopping test can accept a residual well above roundoff when
        # |v| is large; one more chord step with the last factorization is nearly free
        v_p = v - lu.solve(r)
        n_p = self.norm(self._residual(v_p, u_hat, base))
        return (v_p, n_p) if np.isfinite(n_p) and n_p < r_norm else (v, r_norm)

    def _fixed_point(self, v, u_hat, base, relax=0.5):
        """Secant-linearized Picard iteration with relaxation."""
        p = self.params
        f = self.model.f
        lift = base + self.c * (self.lap @ u_hat)
        max_iters = max(p.max_iters, 20 * p.max_iters)
        r_norm = self.norm(self._residual(v, u_hat, base))
        for it in range(max_iters + 1):
            if self._converged(r_norm, v):
                return v, StepInfo(it, r_norm, "fixed-point")
            if not np.isfinite(r_norm) or it == max_iters:
                break
            rhs = lift - self.c * f.f(u_hat + self.c * v)
            v_sol = splu(self._secant_matrix(v)).solve(rhs)
            v = (1.0 - relax) * v + relax * v_sol
            r_norm = self.norm(self._residual(v, u_hat, base))
        raise SolverDiverged(
            f"fixed-point iteration did not reach tol {p.solver_tol:g} "
            f"(residual {r_norm:.3e})", residual_norm=r_norm, iterations=max_iters)

    def step(self, state: SimState, guess=None):
        """Advance one step; returns ``(new_state, StepInfo)``."""
        u_hat, base = self._prepare(state)
        v0 = state.v.copy() if guess is None else np.array(guess, dtype=float)
        if self.use_newton:
            v, info = self._newton(v0, u_hat, base)
        else:
            v, info = self._fixed_point(v0, u_hat, base)
        new = SimState(state.t + self.params.dt, u_hat + self.c * v, v)
        if not new.is_finite:
            raise NonFiniteState(f"non-finite state at t = {new.t:g}")
        return new, info


def residual(v_next, state: SimState, params: StepParams, model: WaveModel) -> np.ndarray:
    """Theta-scheme residual whose root is the next velocity."""
    return ThetaStepper(model, params).residual(v_next, state)


def solve_step(state: SimState, params: StepParams, model: WaveModel, guess=None) -> SimState:
    """One implicit step from ``state``; ``guess`` is the initial iterate (default ``v_n``)."""
    return ThetaStepper(model, params).step(state, guess)[0]


def simulate(model: WaveModel, initial: SimState, params: StepParams, t_final: float,
             stride: int = 1) -> Trajectory:
    """Integrate to ``t_final`` and record every ``stride``-th state.

    The step is shortened, if needed, so that an integer number of steps lands
    on ``t_final``. Ledgers use ``theta v_{n+1} + (1 - theta) v_n``.
    """
    if t_final < 0:
        raise ValueError(f"t_final must be nonnegative, got {t_final}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    n_steps = int(np.ceil(t_final / params.dt - 1e-9)) if t_final > 0 else 0
    if n_steps:
        params = replace(params, dt=t_final / n_steps)
    stepper = ThetaStepper(model, params)
    grid, profile, g, f = model.grid, model.profile, model.g, model.f
    theta, dt = params.theta, params.dt

    state = SimState(0.0, initial.u, initial.v)
    if not state.is_finite:
        raise NonFiniteState("initial state is not finite")
    rows = [(state, 0.0, 0.0, 0.0)]
    kv_cum = fric_cum = obs_cum = 0.0
    for n in range(1, n_steps + 1):
        new, _ = stepper.step(state)
        new = SimState(n * dt, new.u, new.v)
        v_theta = theta * new.v + (1.0 - theta) * state.v
        kv, fric = _rates(v_theta, grid, profile, g)
        kv_cum += dt * kv
        fric_cum += dt * fric
        obs_cum += dt * observability_density(v_theta, grid, profile, g)
        state = new
        if n % stride == 0:
            rows.append((state, kv_cum, fric_cum, obs_cum))

    parts = [energy(s, f, grid) for s, *_ in rows]
    return Trajectory(
        times=np.array([s.t for s, *_ in rows]),
        u=np.array([s.u for s, *_ in rows]),
        v=np.array([s.v for s, *_ in rows]),
        kinetic=np.array([e.kinetic for e in parts]),
        potential=np.array([e.potential for e in parts]),
        potential_F=np.array([e.potential_F for e in parts]),
        d_kv_cum=np.array([r[1] for r in rows]),
        d_fric_cum=np.array([r[2] for r in rows]),
        obs_cum=np.array([r[3] for r in rows]),
        dt=dt,
        theta=theta,
        stride=stride,
    )
