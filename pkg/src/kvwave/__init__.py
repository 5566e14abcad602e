"""Semilinear wave equation with localized Kelvin-Voigt and frictional damping.

Staggered finite differences in 1D and 2D, a monotone theta time stepper,
energy ledgers, empirical observability constants and Lasiecka-Tataru
decay envelopes.
"""
__version__ = "0.1.0"

from .constitutive import make_feedback, make_nonlinearity, validate
from .decay_calculus import (
    ConcaveMajorant,
    DecayCalculus,
    build_calculus,
    check_energy_recursion,
    check_sequence_lemma,
    construct_h,
    solve_envelope,
)
from .energy import balance_residual, energy
from . import errors
from .geometry import build_damping, build_grid, build_regions
from .observability import damping_functional, estimate_constant, sweep_geometries
from .state import SimState, Trajectory
from .stepper import StepParams, WaveModel, simulate, solve_step

__all__ = [
    "__version__", "errors",
    "make_feedback", "make_nonlinearity", "validate",
    "ConcaveMajorant", "DecayCalculus", "build_calculus", "check_energy_recursion",
    "check_sequence_lemma", "construct_h", "solve_envelope",
    "balance_residual", "energy",
    "build_damping", "build_grid", "build_regions",
    "damping_functional", "estimate_constant", "sweep_geometries",
    "SimState", "Trajectory",
    "StepParams", "WaveModel", "simulate", "solve_step",
]
