"""Experiment configuration and per-trial records."""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from config.settings import settings
from models.schemas import ModelParams

Scalar = Union[int, float, bool, str, None]


class ExperimentKind(str, Enum):
    THRESHOLDS = "thresholds"
    CYCLES = "cycles"
    CORE = "core"
    FROZEN = "frozen"
    MOMENTS = "moments"
    ORACLE = "oracle"


class ExperimentConfig(BaseModel):
    """A parameter sweep: grids over (q, k, c) plus run-wide settings."""

    kind: ExperimentKind
    q: List[int] = Field(default_factory=lambda: [3], min_length=1)
    k: List[int] = Field(default_factory=lambda: [3], min_length=1)
    c: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    n: Optional[int] = Field(default=None, ge=1)
    m: Optional[int] = Field(default=None, ge=0, description="Explicit edge count, overrides c")
    trials: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0, description="Trial i uses seed + i")
    L: int = Field(default=3, ge=2, description="Longest cycle length counted")
    depth_budget: int = Field(default=6, ge=0)
    planted: bool = False
    workers: int = Field(default_factory=lambda: settings.default_workers, ge=1)
    frozen_sample: Optional[int] = Field(
        default=None, ge=1, description="Non-core vertices certified per trial (all when unset)"
    )
    samples: int = Field(default=10_000, ge=1, description="Landscape probes")
    directions: int = Field(default=10, ge=1, description="Random quadratic-check directions")
    include_timings: bool = False
    out: Optional[Path] = None
    format: Literal["csv", "json"] = "csv"

    @field_validator("q", "k")
    @classmethod
    def _at_least_three(cls, values: List[int]) -> List[int]:
        if any(v < 3 for v in values):
            raise ValueError("q and k values must be at least 3")
        return sorted(set(values))

    @field_validator("c")
    @classmethod
    def _non_negative(cls, values: List[float]) -> List[float]:
        if any(v < 0 for v in values):
            raise ValueError("c values must be non-negative")
        return sorted(set(values))

    @model_validator(mode="after")
    def _m_needs_n(self) -> "ExperimentConfig":
        if self.m is not None and self.n is None:
            raise ValueError("an explicit m requires n")
        return self

    def param_grid(self) -> List[ModelParams]:
        """Model parameters in lexicographic (q, k, c) order; an explicit m fixes c = m / n."""
        explicit = self.m is not None
        densities = [self.m / self.n] if explicit else self.c
        return [
            ModelParams(q=q, k=k, c=c, n=self.n, m=self.m if explicit else None)
            for q in self.q
            for k in self.k
            for c in densities
        ]

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude={"out", "workers"})


class TrialRecord(BaseModel):
    """One trial: everything needed to replay it plus what it measured."""

    kind: ExperimentKind
    q: int
    k: int
    c: float
    n: Optional[int] = None
    m: Optional[int] = None
    trial: int
    seed: int
    values: Dict[str, Scalar] = Field(default_factory=dict)
    runtime_s: float = 0.0

    @classmethod
    def for_params(
        cls, kind: ExperimentKind, params: ModelParams, trial: int, seed: int, **values: Scalar
    ) -> "TrialRecord":
        return cls(
            kind=kind, q=params.q, k=params.k, c=params.c, n=params.n, m=params.m,
            trial=trial, seed=seed, values=values,
        )

    def sort_key(self):
        return (self.q, self.k, self.c, self.n or 0, self.m or 0, self.seed)

    def flat(self, include_timings: bool = False) -> Dict[str, Scalar]:
        row: Dict[str, Scalar] = {
            "kind": self.kind.value,
            "q": self.q,
            "k": self.k,
            "c": self.c,
            "n": self.n,
            "m": self.m,
            "trial": self.trial,
            "seed": self.seed,
        }
        row.update(self.values)
        if include_timings:
            row["runtime_s"] = self.runtime_s
        return row

    def census_rows(self, include_timings: bool = False) -> List[Dict[str, Scalar]]:
        """Cycle trials in long form: one (trial, length, count) row per C_l value."""
        base = self.flat(include_timings)
        counts = {key: base.pop(key) for key in list(base) if key.startswith("C_")}
        return [{**base, "length": int(key[2:]), "count": value} for key, value in counts.items()]


class ExperimentResult(BaseModel):
    """Records plus aggregate summary rows for one experiment run."""

    config: ExperimentConfig
    records: List[TrialRecord] = Field(default_factory=list)
    summary: List[Dict[str, Scalar]] = Field(default_factory=list)
    report: Dict[str, Any] = Field(default_factory=dict)

    def rows(self) -> List[Dict[str, Scalar]]:
        timings = self.config.include_timings
        if self.records and self.config.kind == ExperimentKind.CYCLES:
            return [row for r in self.records for row in r.census_rows(timings)]
        if self.records:
            return [r.flat(timings) for r in self.records]
        return list(self.summary)
