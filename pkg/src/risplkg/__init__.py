"""Simulation laboratory for RIS-aided physical-layer key generation."""

from .errors import DomainError

__version__ = "0.1.0"

__all__ = ["DomainError", "__version__"]
