"""Data models for hypergraphs, colourings and the derived analytic records."""

import math
from functools import cached_property
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError as PydanticValidationError,
    ValidationInfo,
    field_validator,
    model_validator,
)

from exceptions import ValidationError

# floor(c*n) guard against binary rounding (0.29 * 100 = 28.999...)
_FLOOR_GUARD = 1e-9


class ModelParams(BaseModel):
    """Model parameters: q colours, k-uniform edges, density c, n vertices."""

    q: int = Field(..., ge=3, description="Number of colours")
    k: int = Field(..., ge=3, description="Edge arity")
    c: float = Field(..., ge=0, description="Edge density (edges per vertex)")
    n: Optional[int] = Field(default=None, ge=1, description="Vertex count")
    m: Optional[int] = Field(
        default=None, ge=0, description="Edge count; floor(c*n) when omitted"
    )

    @model_validator(mode="after")
    def _fill_edge_count(self) -> "ModelParams":
        if self.m is not None and self.n is None:
            raise ValueError("an explicit edge count requires n")
        if self.m is None and self.n is not None:
            self.m = math.floor(self.c * self.n + _FLOOR_GUARD)
        return self

    @classmethod
    def with_edges(cls, q: int, k: int, n: int, m: int) -> "ModelParams":
        """Build parameters from an exact edge count (c = m / n)."""
        return build_model(cls, q=q, k=k, c=m / n, n=n, m=m)

    @property
    def x(self) -> int:
        """(q-1)(k-1), the argument of the rigidity equation."""
        return (self.q - 1) * (self.k - 1)

    def require_n(self) -> int:
        if self.n is None:
            raise ValidationError("this operation needs a vertex count n", self.key())
        return self.n

    def key(self) -> Dict[str, Union[int, float, None]]:
        return {"q": self.q, "k": self.k, "c": self.c, "n": self.n, "m": self.m}


def build_model(model_cls, **data):
    """Construct a pydantic model, mapping schema failures to ValidationError."""
    try:
        return model_cls(**data)
    except PydanticValidationError as e:
        raise ValidationError(
            f"invalid {model_cls.__name__}",
            {"errors": e.errors(include_url=False, include_context=False)},
        ) from e


class Hypergraph(BaseModel):
    """k-uniform (multi-)hypergraph on vertices 0..n-1; edges are sorted rows."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int = Field(..., ge=1)
    k: int = Field(..., ge=1)
    edges: np.ndarray = Field(..., description="(m, k) int64 array, rows ascending")
    multi_edges_allowed: bool = Field(default=False)

    @field_validator("edges", mode="before")
    @classmethod
    def _as_sorted_array(cls, value, info: ValidationInfo) -> np.ndarray:
        k = info.data.get("k", 0)
        arr = np.asarray(value, dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, k)
        if arr.ndim != 2:
            raise ValueError("edges must be a two-dimensional array")
        arr = np.sort(arr, axis=1)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_edges(self) -> "Hypergraph":
        edges = self.edges
        if edges.shape[1] != self.k:
            raise ValueError(f"every edge needs exactly k={self.k} vertices")
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.n:
                raise ValueError(f"vertex identifiers must lie in [0, {self.n})")
            if self.k > 1 and not np.all(np.diff(edges, axis=1) > 0):
                raise ValueError("edge vertices must be distinct")
            if not self.multi_edges_allowed and len(np.unique(edges, axis=0)) != len(edges):
                raise ValueError("duplicate edges in a simple hypergraph")
        return self

    @classmethod
    def from_edges(
        cls, n: int, k: int, edges, multi_edges_allowed: bool = False
    ) -> "Hypergraph":
        return build_model(
            cls, n=n, k=k, edges=edges, multi_edges_allowed=multi_edges_allowed
        )

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def incidence(self) -> Tuple[np.ndarray, np.ndarray]:
        flat = self.edges.ravel()
        order = np.argsort(flat, kind="stable")
        edge_ids = order // self.k
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(flat, minlength=self.n), out=ptr[1:])
        return ptr, edge_ids

    def incident_edges(self, v: int) -> np.ndarray:
        """Edge indices containing v, ascending."""
        ptr, edge_ids = self.incidence
        return edge_ids[ptr[v] : ptr[v + 1]]

    @property
    def degrees(self) -> np.ndarray:
        ptr, _ = self.incidence
        return np.diff(ptr)

    def edge_set(self, index: int) -> frozenset:
        return frozenset(int(x) for x in self.edges[index])


class NeighbourhoodLayers(BaseModel):
    """Breadth-first layers around a root vertex."""

    root: int
    layers: List[List[int]] = Field(..., description="Lambda_0, Lambda_1, ...")
    protruding: List[List[int]] = Field(
        ..., description="E_0, E_1, ...: edges meeting Lambda_i that avoid N_{i-1}"
    )
    cycle_at_depth: Optional[int] = Field(
        default=None, description="Least depth at which a cycle event occurred"
    )

    def ball(self, depth: int) -> List[int]:
        """N_depth: the union of Lambda_0..Lambda_depth."""
        out: List[int] = []
        for layer in self.layers[: depth + 1]:
            out.extend(layer)
        return out


class Colouring(BaseModel):
    """A map from vertices 0..n-1 to colours 0..q-1 (not necessarily proper)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    q: int = Field(..., ge=1)
    assignment: np.ndarray

    @field_validator("assignment", mode="before")
    @classmethod
    def _as_array(cls, value) -> np.ndarray:
        arr = np.array(value, dtype=np.int64).reshape(-1)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_range(self) -> "Colouring":
        if self.assignment.size and (
            self.assignment.min() < 0 or self.assignment.max() >= self.q
        ):
            raise ValueError(f"colours must lie in [0, {self.q})")
        return self

    @classmethod
    def of(cls, assignment, q: int) -> "Colouring":
        return build_model(cls, q=q, assignment=assignment)

    @property
    def n(self) -> int:
        return int(self.assignment.shape[0])

    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.q)

    def recoloured(self, vertex: int, colour: int) -> "Colouring":
        arr = self.assignment.copy()
        arr[vertex] = colour
        return Colouring(q=self.q, assignment=arr)

    def to_line(self) -> str:
        return " ".join(str(int(x)) for x in self.assignment)

    @classmethod
    def from_line(cls, line: str, q: int) -> "Colouring":
        return cls.of([int(tok) for tok in line.split()], q)


class ColourDensity(BaseModel):
    """Colour class sizes with n; rho_i = counts[i] / n."""

    counts: List[int]
    n: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_counts(self) -> "ColourDensity":
        if any(c < 0 for c in self.counts) or sum(self.counts) != self.n:
            raise ValueError("counts must be non-negative and sum to n")
        return self

    @property
    def rho(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n


class OverlapMatrix(BaseModel):
    """q x q intersection counts |sigma^-1(i) & tau^-1(j)| with n."""

    counts: List[List[int]]
    n: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_counts(self) -> "OverlapMatrix":
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("overlap counts must be a square matrix")
        if (arr < 0).any() or int(arr.sum()) != self.n:
            raise ValueError("counts must be non-negative and sum to n")
        return self

    @property
    def q(self) -> int:
        return len(self.counts)

    @property
    def rho(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n

    @property
    def row_counts(self) -> List[int]:
        return [int(sum(row)) for row in self.counts]

    @property
    def col_counts(self) -> List[int]:
        return [int(sum(col)) for col in zip(*self.counts)]

    @property
    def row_sums(self) -> np.ndarray:
        return np.asarray(self.row_counts, dtype=float) / self.n

    @property
    def col_sums(self) -> np.ndarray:
        return np.asarray(self.col_counts, dtype=float) / self.n


class CycleCensus(BaseModel):
    """Loose-cycle counts C_l for 2 <= l <= max_length."""

    max_length: int = Field(..., ge=2)
    counts: Dict[int, int]

    def count(self, length: int) -> int:
        return self.counts.get(length, 0)


class PoissonParams(BaseModel):
    """Limit parameters for the length-l loose-cycle count."""

    length: int
    lambda_ell: float = Field(..., gt=0)
    delta_ell: float = Field(..., ge=-1)
    mu_ell: float


class PoissonFit(BaseModel):
    """Chi-square goodness-of-fit of integer samples against Poisson(lambda)."""

    lam: float
    samples: int
    mean: float
    chi2: float
    dof: int
    p_value: float


class CoreTrace(BaseModel):
    """Stripping process record: vertices removed per round and the final core."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int
    rounds: List[np.ndarray]
    core: np.ndarray
    surviving_edges: np.ndarray

    @property
    def core_size(self) -> int:
        return int(self.core.shape[0])

    @property
    def core_fraction(self) -> float:
        return self.core_size / self.n

    def removal_rounds(self) -> np.ndarray:
        """Round index per vertex; -1 for core vertices."""
        out = np.full(self.n, -1, dtype=np.int64)
        for i, removed in enumerate(self.rounds):
            out[removed] = i
        return out

    def to_export(self) -> Dict:
        return {
            "n": self.n,
            "rounds": [r.tolist() for r in self.rounds],
            "core": self.core.tolist(),
            "core_size": self.core_size,
            "surviving_edges": int(self.surviving_edges.shape[0]),
        }


class FlipDigraph(BaseModel):
    """Directed multigraph D(T) induced by a vertex set T."""

    vertices: List[int]
    arcs: List[Tuple[int, int]] = Field(..., description="(v, u) with multiplicity")
    in_degree: Dict[int, int]
    out_degree: Dict[int, int]
    per_colour_out: Dict[int, Dict[int, int]] = Field(
        ..., description="v -> colour -> number of arcs contributed by that colour"
    )


class RecolouringSequence(BaseModel):
    """Single-vertex recolourings that change the target's colour."""

    target: int
    steps: List[Tuple[int, int]] = Field(..., description="(vertex, new colour)")


class FixedPoint(BaseModel):
    """Solution record of the core fixed-point equations."""

    alpha: float
    lam: float = Field(..., ge=0, serialization_alias="lambda")
    rho: float = Field(..., ge=0, le=1)
    upsilon: float = Field(..., ge=0, le=1)
    converged: bool
    iterations: int
    at_threshold: bool = False


class UpsilonValue(BaseModel):
    """Core-size constant with a flag for the undefined (sub-threshold) case."""

    value: float
    defined: bool


class ThresholdReport(BaseModel):
    """Threshold quantities for one (q, k)."""

    q: int
    k: int
    lambda_r: float
    alpha_r: float
    c_r_exact: float
    c_r_asymptotic: float
    c_cond: float
    first_regime_bound: float
    rho_r: float
    lambda_r_gap: float


class MomentFunctions(BaseModel):
    """Constants of the first/second-moment functionals for one parameter set."""

    params: ModelParams
    f_bar: float
    quadratic_coefficient: float
    gamma: float
    psi: float
    kappa: float


class OverlapClass(BaseModel):
    """Separability and s-stability classification of an overlap matrix."""

    separable: bool
    stable_entries: int = Field(..., description="entries above (1 - kappa) / q")
    s_stability: Union[int, Literal["unstable"]]
    in_interior_set: bool
    kappa: float
    degenerate: bool = Field(..., description="kappa >= 1/2: the excluded interval is empty")

    @property
    def label(self) -> str:
        prefix = "separable" if self.separable else "inseparable"
        return f"{prefix}:{self.s_stability}"


class LandscapeClassRow(BaseModel):
    """Best f(rho) - f(rho_bar) seen within one overlap class."""

    label: str
    s_stability: Union[int, Literal["unstable"]]
    samples: int
    max_gap: float
    argmax: List[float] = Field(..., description="row-major overlap matrix")


class LandscapeReport(BaseModel):
    """Summary of a scan over overlap matrices with uniform marginals."""

    params: ModelParams
    f_bar: float
    samples: int
    max_gap: float
    classes: List[LandscapeClassRow]
    bound_checked: bool = Field(
        ..., description="the first-regime upper bound applies (c < (q^(k-1)-1) ln q)"
    )
    bound_violations: int = 0
    kappa: float
    degenerate: bool
