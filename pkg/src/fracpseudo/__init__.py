"""Spectral mild-solution solver for the time-fractional pseudo-parabolic equation

    d_t^alpha u - d_t^alpha Lap u - Lap u = H(u)   in Omega x (0, T),   u = 0 on the boundary,

on intervals and rectangles, with Picard iteration on the mild formulation.
"""

from .special_functions import (BoundConstant, MLAccuracyError, MLParams, beta, gamma, mittag_leffler,
                                mittag_leffler_with_error, ml_bound_estimate, mwright_moment)
from .spectral_domain import (Domain, SpectralBasis, SpectralField, build_basis, hilbert_norm, lebesgue_norm,
                              orlicz_norm, random_field, to_physical, to_spectral)
from .propagators import apply_R, apply_S, linear_bound_probe, proof_bounds
from .nonlinearities import HypothesisError, NonlinearitySpec, eval_H
from .picard_solver import (Problem, SolveReport, TimeGrid, Trajectory, WeightedNormSpec, build_time_grid,
                            extend_and_detect_blowup, mild_residual, picard_solve, sigma_for_contraction,
                            singular_convolution)

__version__ = "0.1.0"

__all__ = [
    "BoundConstant",
    "MLAccuracyError",
    "MLParams",
    "beta",
    "gamma",
    "mittag_leffler",
    "mittag_leffler_with_error",
    "ml_bound_estimate",
    "mwright_moment",
    "Domain",
    "SpectralBasis",
    "SpectralField",
    "build_basis",
    "hilbert_norm",
    "lebesgue_norm",
    "orlicz_norm",
    "random_field",
    "to_physical",
    "to_spectral",
    "apply_R",
    "apply_S",
    "linear_bound_probe",
    "proof_bounds",
    "HypothesisError",
    "NonlinearitySpec",
    "eval_H",
    "Problem",
    "SolveReport",
    "TimeGrid",
    "Trajectory",
    "WeightedNormSpec",
    "build_time_grid",
    "extend_and_detect_blowup",
    "mild_residual",
    "picard_solve",
    "sigma_for_contraction",
    "singular_convolution",
]
