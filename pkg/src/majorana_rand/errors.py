"""Exception types raised across the package."""


class MajoranaError(Exception):
    """Base class for all package errors."""


class DomainError(MajoranaError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class DegenerateState(MajoranaError):
    """A constructed state vector is identically zero or not finite."""


class RootFindingFailure(MajoranaError):
    """Polynomial roots could not be found to the requested residual."""


class SizeLimit(MajoranaError):
    """The input is larger than the configured cost guard allows."""


class QuadratureDegreeTooLow(MajoranaError):
    """A sphere grid cannot integrate the requested band limit exactly."""


class OutOfRange(MajoranaError):
    """A run configuration exceeds a configured maximum."""


class InconclusiveOrdering(UserWarning):
    """Ensemble means could not be ordered because error bars overlap."""


class IllConditioned(RuntimeWarning):
    """A result lost more digits to cancellation than its documented tolerance allows."""
