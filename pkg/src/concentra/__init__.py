"""Symmetrization-based concentration bounds for finite empirical processes."""

from .errors import DomainError

__version__ = "0.1.0"

__all__ = ["DomainError", "__version__"]
