"""Models package initialization."""

from .schemas import (
    ModelParams,
    Hypergraph,
    Colouring,
    ColourDensity,
    OverlapMatrix,
    CoreTrace,
    FixedPoint,
    ThresholdReport,
    build_model,
)
from .experiment import ExperimentConfig, ExperimentKind, ExperimentResult, TrialRecord

__all__ = [
    "ModelParams",
    "Hypergraph",
    "Colouring",
    "ColourDensity",
    "OverlapMatrix",
    "CoreTrace",
    "FixedPoint",
    "ThresholdReport",
    "build_model",
    "ExperimentConfig",
    "ExperimentKind",
    "ExperimentResult",
    "TrialRecord",
]
