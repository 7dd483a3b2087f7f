"""Numerical laboratory for the maximal Cauchy integral on chord-arc curves."""

from . import curves, curvespec, geometry, harness, operators
from .errors import (
    BranchAmbiguityError,
    CauchyLabError,
    ConstructionError,
    DegenerateGeometryError,
    DomainError,
    NumericalGateError,
    ResolutionError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "curves",
    "curvespec",
    "geometry",
    "harness",
    "operators",
    "BranchAmbiguityError",
    "CauchyLabError",
    "ConstructionError",
    "DegenerateGeometryError",
    "DomainError",
    "NumericalGateError",
    "ResolutionError",
    "ValidationError",
    "__version__",
]
