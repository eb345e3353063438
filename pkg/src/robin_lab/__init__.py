"""Finite element study of the Robin Laplacian on convex planar domains."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    FactorizationError,
    InconclusiveError,
    InvalidDomainError,
    MeshError,
    RobinLabError,
    UnsupportedDomainError,
)

__all__ = [
    "__version__",
    "ConvergenceError",
    "FactorizationError",
    "InconclusiveError",
    "InvalidDomainError",
    "MeshError",
    "RobinLabError",
    "UnsupportedDomainError",
]
