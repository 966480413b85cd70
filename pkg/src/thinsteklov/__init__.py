"""Biharmonic Steklov eigenvalues on thin domains and their 1D limit."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DerivedConstants,
    Profile,
    ProblemParams,
    derived_constants,
    distortion_factor,
    n_factor,
    profile_eval,
    unit_ball_volume,
    validate_params,
)
from .pencil import EigenSolution, factor_spd, finite_pencil_eigs, solve_spd  # noqa: E402

__all__ = [
    "DerivedConstants",
    "EigenSolution",
    "Profile",
    "ProblemParams",
    "derived_constants",
    "distortion_factor",
    "factor_spd",
    "finite_pencil_eigs",
    "n_factor",
    "profile_eval",
    "solve_spd",
    "unit_ball_volume",
    "validate_params",
]
