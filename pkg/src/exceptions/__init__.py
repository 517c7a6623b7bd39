"""Exceptions package initialization."""

from .custom_exceptions import (
    HypercolException,
    ValidationError,
    ResourceGuardError,
    GenerationError,
    UncolourableError,
    DivergenceError,
    NumericalError,
    StatisticsError,
)

__all__ = [
    "HypercolException",
    "ValidationError",
    "ResourceGuardError",
    "GenerationError",
    "UncolourableError",
    "DivergenceError",
    "NumericalError",
    "StatisticsError",
]
