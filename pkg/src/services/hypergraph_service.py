"""Service for generating, exploring and serializing k-uniform hypergraphs."""

import itertools
from math import comb
from pathlib import Path
from typing import Iterable, List, Optional, Set, Tuple

import numpy as np

from config.settings import settings
from exceptions import GenerationError, ResourceGuardError, ValidationError
from models.schemas import (
    Colouring,
    Hypergraph,
    ModelParams,
    NeighbourhoodLayers,
)
from utils.logger import get_logger

logger = get_logger(__name__)


def draw_k_subsets(rng: np.random.Generator, n: int, k: int, count: int) -> np.ndarray:
    """
    Draw `count` independent uniform k-subsets of [0, n) as sorted rows.

    Ordered k-tuples with repeated entries are rejected, which leaves the
    sorted rows uniform over all C(n, k) subsets.
    """
    chunks: List[np.ndarray] = []
    have = 0
    while have < count:
        need = count - have
        draws = rng.integers(0, n, size=(need + need // 4 + 16, k))
        draws.sort(axis=1)
        distinct = np.all(np.diff(draws, axis=1) > 0, axis=1)
        accepted = draws[distinct][:need]
        chunks.append(accepted)
        have += accepted.shape[0]
    if not chunks:
        return np.empty((0, k), dtype=np.int64)
    return np.concatenate(chunks).astype(np.int64, copy=False)


class HypergraphService:
    """Service for the simple, with-replacement and planted hypergraph models."""

    def gen_simple(self, params: ModelParams, seed: int) -> Hypergraph:
        """
        Draw a uniform simple hypergraph with exactly m distinct edges.

        Args:
            params: Model parameters (n required)
            seed: Seed for numpy's default generator

        Returns:
            Hypergraph with multi_edges_allowed False
        """
        n = params.require_n()
        k, m = params.k, params.m
        total = comb(n, k)
        if m > total:
            raise ValidationError(
                f"m={m} exceeds the {total} available {k}-subsets", params.key()
            )

        rng = np.random.default_rng(seed)
        if 2 * m > total and total <= settings.max_enumeration_states:
            # Dense regime: choose m of the enumerated subsets directly
            all_subsets = np.array(
                list(itertools.combinations(range(n), k)), dtype=np.int64
            ).reshape(total, k)
            chosen = rng.choice(total, size=m, replace=False)
            edges = all_subsets[chosen]
        else:
            seen: Set[Tuple[int, ...]] = set()
            rows: List[Tuple[int, ...]] = []
            while len(rows) < m:
                for row in map(tuple, draw_k_subsets(rng, n, k, m - len(rows)).tolist()):
                    if row not in seen:
                        seen.add(row)
                        rows.append(row)
            edges = np.array(rows, dtype=np.int64).reshape(m, k)

        logger.debug(f"gen_simple n={n} k={k} m={m} seed={seed}")
        return Hypergraph(n=n, k=k, edges=edges, multi_edges_allowed=False)

    def gen_multi(self, params: ModelParams, seed: int) -> Hypergraph:
        """Draw m independent uniform k-subsets (duplicates permitted)."""
        n = params.require_n()
        if n < params.k:
            raise ValidationError(f"need n >= k, got n={n} k={params.k}", params.key())
        rng = np.random.default_rng(seed)
        edges = draw_k_subsets(rng, n, params.k, params.m)
        logger.debug(f"gen_multi n={n} k={params.k} m={params.m} seed={seed}")
        return Hypergraph(n=n, k=params.k, edges=edges, multi_edges_allowed=True)

    def gen_planted(
        self, params: ModelParams, sigma: Colouring, seed: int
    ) -> Hypergraph:
        """
        Draw m independent uniform k-subsets that are not monochromatic under sigma.

        Args:
            params: Model parameters (n required)
            sigma: Planted colouring on n vertices
            seed: Seed for numpy's default generator

        Returns:
            Multi-hypergraph for which sigma is proper

        Raises:
            GenerationError: if sigma leaves no admissible edge
        """
        n = params.require_n()
        k, m = params.k, params.m
        if sigma.n != n:
            raise ValidationError(
                f"colouring has {sigma.n} vertices, expected {n}", params.key()
            )
        total = comb(n, k)
        mono = sum(comb(int(size), k) for size in sigma.class_sizes())
        admissible = total - mono
        if admissible <= 0:
            raise GenerationError(
                "no admissible edge: every k-subset is monochromatic",
                {"n": n, "k": k, "class_sizes": sigma.class_sizes().tolist()},
            )

        rng = np.random.default_rng(seed)
        colours = np.asarray(sigma.assignment)
        acceptance = admissible / total
        chunks: List[np.ndarray] = []
        have = 0
        while have < m:
            need = m - have
            batch = min(int(need / acceptance * 1.1) + 16, 10_000_000)
            draws = draw_k_subsets(rng, n, k, batch)
            c = colours[draws]
            bichromatic = np.any(c != c[:, :1], axis=1)
            accepted = draws[bichromatic][:need]
            chunks.append(accepted)
            have += accepted.shape[0]

        edges = np.concatenate(chunks) if chunks else np.empty((0, k), dtype=np.int64)
        logger.debug(
            f"gen_planted n={n} k={k} m={m} seed={seed} acceptance={acceptance:.4f}"
        )
        return Hypergraph(n=n, k=k, edges=edges, multi_edges_allowed=True)

    def explore_neighbourhood(
        self, h: Hypergraph, v: int, depth: int
    ) -> NeighbourhoodLayers:
        """
        Breadth-first edge expansion around v.

        E_i holds the edges meeting Lambda_i that were not reached before,
        Lambda_{i+1} the vertices of E_i outside N_i. A cycle event at depth i
        is an edge of E_i meeting N_i twice, or two edges of E_i sharing a
        vertex outside N_i.
        """
        if not 0 <= v < h.n:
            raise ValidationError(f"vertex {v} outside [0, {h.n})")
        if depth < 0:
            raise ValidationError(f"depth must be non-negative, got {depth}")

        layers: List[List[int]] = [[v]]
        protruding: List[List[int]] = []
        explored = {v}
        reached_edges: Set[int] = set()
        cycle_at: Optional[int] = None

        for i in range(depth):
            frontier = layers[i]
            if not frontier:
                break
            layer_edges = sorted(
                {
                    int(e)
                    for u in frontier
                    for e in h.incident_edges(u)
                    if int(e) not in reached_edges
                }
            )
            reached_edges.update(layer_edges)
            protruding.append(layer_edges)

            exposed: Set[int] = set()
            event = False
            for e in layer_edges:
                outside = [int(u) for u in h.edges[e] if int(u) not in explored]
                if h.k - len(outside) >= 2 or exposed.intersection(outside):
                    event = True
                exposed.update(outside)
            if event and cycle_at is None:
                cycle_at = i

            explored.update(exposed)
            layers.append(sorted(exposed))

        return NeighbourhoodLayers(
            root=v, layers=layers, protruding=protruding, cycle_at_depth=cycle_at
        )

    def induced_subhypergraph(
        self, h: Hypergraph, vertices: Iterable[int]
    ) -> Tuple[Hypergraph, np.ndarray]:
        """Keep the edges lying inside `vertices`; labels and n are unchanged."""
        mask = np.zeros(h.n, dtype=bool)
        mask[np.fromiter(vertices, dtype=np.int64)] = True
        inside = np.flatnonzero(np.all(mask[h.edges], axis=1)) if h.m else np.empty(0, dtype=np.int64)
        sub = Hypergraph(
            n=h.n, k=h.k, edges=h.edges[inside], multi_edges_allowed=h.multi_edges_allowed
        )
        return sub, inside

    def degree_sequence(self, h: Hypergraph) -> np.ndarray:
        return h.degrees.copy()

    def to_text(self, h: Hypergraph) -> str:
        """Serialize as `n k m multi` followed by one sorted edge per line."""
        lines = [f"{h.n} {h.k} {h.m} {int(h.multi_edges_allowed)}"]
        lines.extend(" ".join(str(int(x)) for x in row) for row in h.edges)
        return "\n".join(lines) + "\n"

    def from_text(self, text: str) -> Hypergraph:
        """Parse the line-oriented format written by `to_text`."""
        rows = [line.split() for line in text.splitlines() if line.strip()]
        if not rows or len(rows[0]) != 4:
            raise ValidationError("missing header line `n k m multi`")
        try:
            n, k, m, multi = (int(tok) for tok in rows[0])
            edges = [[int(tok) for tok in row] for row in rows[1:]]
        except ValueError as e:
            raise ValidationError(f"non-integer token in hypergraph text: {e}") from e
        if len(edges) != m:
            raise ValidationError(f"header announces {m} edges, found {len(edges)}")
        return Hypergraph.from_edges(n, k, edges, multi_edges_allowed=bool(multi))

    def write_hypergraph(self, h: Hypergraph, path: Path) -> None:
        Path(path).write_text(self.to_text(h))
        logger.info(f"Wrote hypergraph n={h.n} m={h.m} to {path}")

    def read_hypergraph(self, path: Path) -> Hypergraph:
        return self.from_text(Path(path).read_text())

    def check_work(self, n: int, trials: int) -> None:
        """Resource guard on the total simulated vertex count."""
        if n * trials > settings.max_trial_work:
            raise ResourceGuardError(
                f"n*trials={n * trials} exceeds max_trial_work={settings.max_trial_work}",
                {"n": n, "trials": trials},
            )


hypergraph_service = HypergraphService()
