"""Exception types shared across the package."""

from numpy.linalg import LinAlgError

__all__ = ["ParameterError", "BoundaryError", "DataError", "ConfigError", "LinAlgError"]


class ParameterError(ValueError):
    """A parameter lies outside the domain of the operation."""


class BoundaryError(ValueError):
    """A simplex point lies on (or numerically at) the boundary."""


class DataError(ValueError):
    """Input data is malformed or inconsistent."""


class ConfigError(ValueError):
    """A run configuration is invalid."""
