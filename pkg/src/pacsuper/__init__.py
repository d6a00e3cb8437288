"""Anytime PAC-Bayes certificates for unbounded losses, with Monte Carlo checks."""
from .errors import DomainError, UnsupportedError

__version__ = "0.1.0"

__all__ = ["DomainError", "UnsupportedError", "__version__"]
