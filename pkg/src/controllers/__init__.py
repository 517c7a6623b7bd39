"""Controllers package initialization."""

from .health_controller import router as health_router
from .threshold_controller import router as threshold_router
from .experiment_controller import router as experiment_router

__all__ = ["health_router", "threshold_router", "experiment_router"]
