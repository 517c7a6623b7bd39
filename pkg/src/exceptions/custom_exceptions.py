"""Custom exception classes for the hypercol toolkit."""

from typing import Any, Dict, Optional


class HypercolException(Exception):
    """Base exception for the toolkit."""

    exit_code: int = 1
    status_code: int = 500

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class ValidationError(HypercolException):
    """Raised for invalid parameters, mismatched dimensions or improper colourings."""

    exit_code = 2
    status_code = 422


class ResourceGuardError(HypercolException):
    """Raised when an input exceeds a configured size guard."""

    exit_code = 3
    status_code = 413


class GenerationError(HypercolException):
    """Raised when a sampler cannot produce an admissible object."""

    status_code = 422


class UncolourableError(HypercolException):
    """Raised when a hypergraph has no proper colouring."""

    status_code = 422


class DivergenceError(HypercolException):
    """Raised when a series or second-moment quantity diverges."""

    status_code = 422


class NumericalError(HypercolException):
    """Raised when a numerical identity or log argument check fails."""

    pass


class StatisticsError(HypercolException):
    """Raised for degenerate or undersized statistical fits."""

    status_code = 422

