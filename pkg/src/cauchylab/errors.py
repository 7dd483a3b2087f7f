"""Exception taxonomy shared across the package.

The CLI maps these onto exit statuses: validation problems exit 2,
numerical gates (branch ambiguity, degenerate geometry, resolution
floors, failed constructions) exit 3.
"""


class CauchyLabError(Exception):
    """Base class for all package errors."""


class DomainError(CauchyLabError, ValueError):
    """An argument is outside the documented domain of an operation."""


class ValidationError(CauchyLabError, ValueError):
    """A spec document or parameter set failed validation."""


class NumericalGateError(CauchyLabError, RuntimeError):
    """A runtime numerical gate tripped; the result would not be trustworthy."""


class DegenerateGeometryError(NumericalGateError):
    """Two distinct parameters mapped to (numerically) the same point."""


class BranchAmbiguityError(NumericalGateError):
    """The log-branch integration path passed too close to the origin."""


class ResolutionError(NumericalGateError):
    """A truncation or window fell below the grid resolution floor."""


class ConstructionError(NumericalGateError):
    """A curve construction failed a geometric self-consistency check."""
