"""Experiment endpoints: run a bounded sweep and return the JSON payload."""

from typing import Any, Dict

from fastapi import APIRouter, Body

from config.settings import settings
from core.result_store import result_store
from exceptions import ResourceGuardError
from models.experiment import ExperimentConfig, ExperimentKind
from models.schemas import build_model
from services.experiment_service import experiment_service
from utils.logger import get_logger

logger = get_logger(__name__)

router = APIRouter(prefix="/api/v1/experiments", tags=["experiments"])


@router.post("/{kind}")
def run_experiment(kind: ExperimentKind, body: Dict[str, Any] = Body(default_factory=dict)):
    """
    Run one experiment in-process with a single worker.

    The body holds ExperimentConfig fields; `out` and `workers` are ignored.
    """
    data = {key: value for key, value in body.items() if key not in {"kind", "out", "workers"}}
    config = build_model(ExperimentConfig, kind=kind, workers=1, **data)

    if (config.n or 0) > settings.api_max_n or config.trials > settings.api_max_trials:
        raise ResourceGuardError(
            "experiment exceeds the HTTP size limits",
            {
                "n": config.n,
                "trials": config.trials,
                "api_max_n": settings.api_max_n,
                "api_max_trials": settings.api_max_trials,
            },
        )

    logger.info(f"HTTP experiment {kind.value} with {len(config.param_grid())} grid point(s)")
    result = experiment_service.run(config)
    return result_store.to_payload(result)
