"""Services package initialization."""

from .hypergraph_service import hypergraph_service
from .colouring_service import colouring_service
from .cycle_service import cycle_service
from .core_service import core_service
from .threshold_service import threshold_service
from .moment_service import moment_service
from .experiment_service import experiment_service

__all__ = [
    "hypergraph_service",
    "colouring_service",
    "cycle_service",
    "core_service",
    "threshold_service",
    "moment_service",
    "experiment_service",
]
