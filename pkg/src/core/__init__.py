"""Core package initialization."""

from .result_store import ResultStore, result_store
from .trial_runner import TrialRunner

__all__ = ["ResultStore", "TrialRunner", "result_store"]
