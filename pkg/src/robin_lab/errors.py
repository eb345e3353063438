"""Exception types shared across the package."""


class RobinLabError(Exception):
    """Base class for all package errors."""


class InvalidDomainError(RobinLabError, ValueError):
    """A domain violates its convexity or non-degeneracy invariants."""


class UnsupportedDomainError(RobinLabError, TypeError):
    """An operation was called on a domain type it cannot handle."""


class MeshError(RobinLabError):
    """Mesh generation failed or was requested with invalid parameters."""


class ConvergenceError(RobinLabError):
    """An iterative solver stopped before meeting its residual contract.

    The best residuals reached are kept in ``residuals`` so callers can report
    how far off the solve was.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class FactorizationError(RobinLabError):
    """A shifted pencil expected to be positive definite was not."""

    def __init__(self, message, suggested_shift=None):
        super().__init__(message)
        self.suggested_shift = suggested_shift


class InconclusiveError(RobinLabError):
    """Not enough eigenpairs were computed to answer the question asked."""
