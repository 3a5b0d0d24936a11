"""Numerical toolkit for bi-flat F-manifolds in canonical coordinates."""
from .epsilon import EpsilonConfig, build_hierarchy, epsilon_fields, flat_coordinates_n3, reciprocal_transform
from .dim2 import build_dim2, dim2_fields
from .geometry import verify_biflat
from .painleve3 import (
    FSystemState, epsilon_to_fstate, f_from_state, integrate_fsystem, painleve_parameters, solve_Cij,
)

__all__ = [
    "EpsilonConfig", "FSystemState", "build_dim2", "build_hierarchy", "dim2_fields", "epsilon_fields",
    "epsilon_to_fstate", "f_from_state", "flat_coordinates_n3", "integrate_fsystem",
    "painleve_parameters", "reciprocal_transform", "solve_Cij", "verify_biflat",
]
__version__ = "0.1.0"
