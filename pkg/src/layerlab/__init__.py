"""Numerical laboratory for clustered transition layers.

Modules are organized along the pipeline: scalar double wells
(potential), the one-dimensional connecting profile and its truncation
(profile1d), tail interactions (interaction), reduced envelope and chain
models (liouville_toda), the planar solver (allencahn2d), geometric
reduction of computed fields (reduction), quadratic stability forms
(stability), and scenario orchestration (harness).
"""

from .errors import (
    ConfigInvalid,
    IoError,
    LayerlabError,
    NumericalError,
)
from .potential import get_potential, make_polynomial, make_quartic, validate
from .profile1d import solve_profile, truncate

__version__ = "0.1.0"

__all__ = [
    "ConfigInvalid",
    "IoError",
    "LayerlabError",
    "NumericalError",
    "get_potential",
    "make_polynomial",
    "make_quartic",
    "validate",
    "solve_profile",
    "truncate",
    "__version__",
]
