"""Threshold table and fixed-point endpoints."""

from typing import List

from fastapi import APIRouter, Query

from models.schemas import ModelParams, ThresholdReport, build_model
from services.threshold_service import threshold_service
from utils.logger import get_logger

logger = get_logger(__name__)

router = APIRouter(prefix="/api/v1/thresholds", tags=["thresholds"])


@router.get("/", response_model=List[ThresholdReport])
async def threshold_table(
    q: List[int] = Query(default=[3], description="Colour counts"),
    k: List[int] = Query(default=[3], description="Edge arities"),
):
    """lambda_r, alpha_r, c_r, c_cond and the first-regime bound for every (q, k)."""
    for qq in q:
        for kk in k:
            build_model(ModelParams, q=qq, k=kk, c=0.0)  # rejects q or k below 3
    return threshold_service.threshold_table(sorted(set(q)), sorted(set(k)))


@router.get("/fixed-point")
async def fixed_point(q: int = 3, k: int = 3, c: float = Query(..., ge=0)):
    """Largest fixed point (lambda, rho) and the core fraction Upsilon for one (q, k, c)."""
    params = build_model(ModelParams, q=q, k=k, c=c)
    logger.debug(f"fixed point requested at {params.key()}")
    point = threshold_service.fixed_point(params)
    upsilon = threshold_service.upsilon(params)
    return {
        "params": params.key(),
        "fixed_point": point.model_dump(by_alias=True),
        "upsilon": upsilon.model_dump(),
        "c_r": threshold_service.c_r(q, k),
    }
