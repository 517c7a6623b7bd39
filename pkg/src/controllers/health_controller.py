"""Health check and system status endpoints."""

import numpy as np
import pandas as pd
import scipy
from fastapi import APIRouter
from fastapi.responses import JSONResponse

from config.settings import settings
from services.threshold_service import threshold_service
from utils.logger import get_logger

logger = get_logger(__name__)

router = APIRouter(prefix="/api/v1/health", tags=["health"])


@router.get("/")
async def health_check():
    """Basic health check endpoint."""
    return {
        "status": "healthy",
        "app_name": settings.app_name,
        "version": settings.app_version,
    }


@router.get("/detailed")
async def detailed_health_check():
    """Health check including a numerical self-test and the active guards."""
    status = {
        "status": "healthy",
        "app_name": settings.app_name,
        "version": settings.app_version,
        "components": {
            "numerics": {
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "pandas": pd.__version__,
            },
            "guards": {
                "max_oracle_vertices": settings.max_oracle_vertices,
                "max_trial_work": settings.max_trial_work,
                "api_max_n": settings.api_max_n,
                "api_max_trials": settings.api_max_trials,
            },
        },
    }

    try:
        # lambda_r cross-checks root finding against W_-1
        lam = threshold_service.lambda_r(3, 3)
        status["components"]["self_test"] = {"status": "healthy", "lambda_r_3_3": lam}
    except Exception as e:
        logger.error(f"Numerical self-test failed: {e}")
        status["components"]["self_test"] = {"status": "unhealthy", "error": str(e)}
        status["status"] = "unhealthy"
        return JSONResponse(status_code=503, content=status)

    return status
