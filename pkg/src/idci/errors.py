"""Exception types shared across the package."""


class IdciError(Exception):
    """Base class for all package-specific errors."""


class DomainError(IdciError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedModelError(IdciError, ValueError):
    """The requested (model, q) combination has no supported closed form."""


class ConvergenceError(IdciError, RuntimeError):
    """A numerical routine failed to converge; carries diagnostics in args."""


class ConsistencyError(IdciError, RuntimeError):
    """Two internally equivalent formulas disagreed beyond tolerance."""


class ConfigError(IdciError, ValueError):
    """A run configuration file or flag set is invalid."""
