"""Exception types shared across the package."""


class BackflowError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(BackflowError):
    """Evaluation requested outside the model's (t, x) domain."""


class DataError(BackflowError):
    """Initial or inflow data violate a validity requirement."""


class MonotonicityError(DataError):
    """A velocity profile is not strictly increasing in the normal variable."""


class TruncationError(DataError):
    """A profile does not reach the outer-flow value within tolerance."""


class InvertibilityError(BackflowError):
    """Shear profile cannot be inverted back to a velocity profile."""


class ConfigError(BackflowError):
    """Invalid run configuration (bad key, type, or invariant)."""


class InstabilityError(BackflowError):
    """The time stepper produced a non-finite value."""


class NumericalError(BackflowError):
    """A linear solve or other numerical kernel failed."""
