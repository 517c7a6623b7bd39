"""Utility modules for the hypercol toolkit."""

from .logger import configure_application_logging, get_logger

__all__ = ["configure_application_logging", "get_logger"]
