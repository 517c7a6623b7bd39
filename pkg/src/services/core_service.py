"""Service for essential edges, core stripping, frozen vertices and flippable sets."""

import itertools
from typing import Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from config.settings import settings
from exceptions import ResourceGuardError, ValidationError
from models.schemas import (
    Colouring,
    CoreTrace,
    FlipDigraph,
    Hypergraph,
    RecolouringSequence,
)
from services.colouring_service import colouring_service
from services.hypergraph_service import hypergraph_service
from utils.logger import get_logger

logger = get_logger(__name__)


def _essential_incidences(
    h: Hypergraph, sigma: Colouring
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (edge, vertex, colour) triples with edge (vertex, colour)-essential.

    For k >= 3 an edge is essential for at most one vertex.
    """
    if h.m == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, empty
    colours = sigma.assignment[h.edges]
    edge_ids, vertices, gammas = [], [], []
    for j in range(h.k):
        others = np.delete(colours, j, axis=1)
        hit = np.all(others == others[:, :1], axis=1) & (others[:, 0] != colours[:, j])
        rows = np.flatnonzero(hit)
        edge_ids.append(rows)
        vertices.append(h.edges[rows, j])
        gammas.append(others[rows, 0])
    return (
        np.concatenate(edge_ids).astype(np.int64),
        np.concatenate(vertices).astype(np.int64),
        np.concatenate(gammas).astype(np.int64),
    )


def _gather_incident(ptr: np.ndarray, edge_ids: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Concatenated incident-edge lists of `vertices` (CSR gather)."""
    starts = ptr[vertices]
    lengths = ptr[vertices + 1] - starts
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.repeat(starts - np.cumsum(lengths) + lengths, lengths) + np.arange(total)
    return edge_ids[offsets]


class CoreService:
    """Service for the stripping process and the objects built on the core."""

    def _require_proper(self, h: Hypergraph, sigma: Colouring) -> None:
        if not colouring_service.is_proper(h, sigma):
            raise ValidationError("the colouring is not proper on this hypergraph")

    def essential_edges(
        self, h: Hypergraph, sigma: Colouring, v: int, gamma: int
    ) -> List[int]:
        """Edges through v whose other k-1 vertices all have colour gamma."""
        if not 0 <= v < h.n:
            raise ValidationError(f"vertex {v} outside [0, {h.n})")
        if not 0 <= gamma < sigma.q:
            raise ValidationError(f"colour {gamma} outside [0, {sigma.q})")
        if gamma == int(sigma.assignment[v]):
            raise ValidationError("gamma must differ from the vertex's own colour")
        self._require_proper(h, sigma)

        out = []
        for e in h.incident_edges(v).tolist():
            others = [int(sigma.assignment[u]) for u in h.edges[e] if u != v]
            if all(col == gamma for col in others):
                out.append(e)
        return out

    def essential_edge_counts(self, h: Hypergraph, sigma: Colouring) -> np.ndarray:
        """n x q table of (v, gamma)-essential edge counts (own colour column is 0)."""
        _, vertices, gammas = _essential_incidences(h, sigma)
        return np.bincount(
            vertices * sigma.q + gammas, minlength=h.n * sigma.q
        ).reshape(h.n, sigma.q)

    def extract_core(self, h: Hypergraph, sigma: Colouring) -> CoreTrace:
        """
        Strip in simultaneous rounds: round i removes every surviving vertex that
        lacks an essential edge for some colour other than its own, together with
        all edges incident to removed vertices.

        Per-(v, gamma) counters are decremented as edges die, so total work is
        linear in the number of incidences.
        """
        self._require_proper(h, sigma)
        n, q = h.n, sigma.q
        ess_e, ess_v, ess_c = _essential_incidences(h, sigma)
        counters = np.bincount(ess_v * q + ess_c, minlength=n * q).reshape(n, q)

        needs = np.ones((n, q), dtype=bool)
        needs[np.arange(n), sigma.assignment] = False

        # essential incidences grouped by edge
        order = np.argsort(ess_e, kind="stable")
        ess_ptr = np.zeros(h.m + 1, dtype=np.int64)
        np.cumsum(np.bincount(ess_e, minlength=h.m), out=ess_ptr[1:])
        ess_v, ess_c = ess_v[order], ess_c[order]

        ptr, incident = h.incidence
        alive_v = np.ones(n, dtype=bool)
        alive_e = np.ones(h.m, dtype=bool)
        rounds: List[np.ndarray] = []

        failing = np.flatnonzero(np.any(needs & (counters == 0), axis=1))
        while failing.size:
            rounds.append(failing)
            alive_v[failing] = False

            touched = _gather_incident(ptr, incident, failing)
            dying = np.unique(touched[alive_e[touched]])
            alive_e[dying] = False

            slots = _gather_incident(ess_ptr, np.arange(ess_v.size), dying)
            if slots.size:
                np.subtract.at(counters, (ess_v[slots], ess_c[slots]), 1)
                candidates = np.unique(ess_v[slots])
                candidates = candidates[alive_v[candidates]]
                failing = candidates[np.any(needs[candidates] & (counters[candidates] == 0), axis=1)]
            else:
                failing = np.empty(0, dtype=np.int64)

        core = np.flatnonzero(alive_v)
        logger.debug(
            f"core extraction: {len(rounds)} rounds, core {core.size}/{n}"
        )
        return CoreTrace(
            n=n, rounds=rounds, core=core, surviving_edges=np.flatnonzero(alive_e)
        )

    def induced_trace_fractions(self, trace: CoreTrace) -> np.ndarray:
        """Fraction of vertices still present before round 0, after round 0, and so on."""
        removed = np.cumsum([0] + [r.size for r in trace.rounds])
        return 1.0 - removed / trace.n

    def validate_recolouring(
        self, h: Hypergraph, sigma: Colouring, sequence: RecolouringSequence
    ) -> bool:
        """Every prefix proper, and the target ends with a different colour."""
        if not colouring_service.is_proper(h, sigma):
            return False
        current = sigma.assignment.copy()
        for vertex, colour in sequence.steps:
            if not (0 <= vertex < h.n and 0 <= colour < sigma.q):
                return False
            current[vertex] = colour
            if not self._locally_proper(h, current, vertex):
                return False
        return bool(current[sequence.target] != sigma.assignment[sequence.target])

    @staticmethod
    def _locally_proper(h: Hypergraph, colours: np.ndarray, vertex: int) -> bool:
        incident = h.incident_edges(vertex)
        if incident.size == 0:
            return True
        c = colours[h.edges[incident]]
        return bool(np.all(np.any(c != c[:, :1], axis=1)))

    def recolouring_certificate(
        self,
        h: Hypergraph,
        sigma: Colouring,
        v: int,
        depth_budget: int,
        trace: Optional[CoreTrace] = None,
    ) -> Optional[RecolouringSequence]:
        """
        Witness that v is not 1-frozen, following the stripping order.

        With r the round in which v was stripped, the vertices of N_r(v)
        stripped earlier are recoloured round by round (ties by id), then v.
        Each takes the least colour it has no essential edge for at the time it
        was stripped, or failing that the least colour keeping its edges
        bichromatic. Returns None when v is in the core, r >= depth_budget, the
        depth-r neighbourhood contains a cycle, or no valid sequence results.
        """
        self._require_proper(h, sigma)
        if not 0 <= v < h.n:
            raise ValidationError(f"vertex {v} outside [0, {h.n})")
        trace = trace or self.extract_core(h, sigma)
        round_of = trace.removal_rounds()
        r = int(round_of[v])
        if r < 0 or r >= depth_budget:
            return None

        layers = hypergraph_service.explore_neighbourhood(h, v, r)
        if layers.cycle_at_depth is not None:
            return None

        earlier = sorted(
            (u for u in layers.ball(r) if 0 <= round_of[u] < r),
            key=lambda u: (int(round_of[u]), u),
        )
        current = sigma.assignment.copy()
        steps: List[Tuple[int, int]] = []
        for u in earlier + [v]:
            colour = self._next_colour(h, sigma, current, u, int(round_of[u]), round_of)
            if colour is None:
                if u == v:
                    return None
                continue
            current[u] = colour
            steps.append((u, colour))

        sequence = RecolouringSequence(target=v, steps=steps)
        if not self.validate_recolouring(h, sigma, sequence):
            logger.warning(f"discarding invalid recolouring sequence for vertex {v}")
            return None
        return sequence

    def _next_colour(
        self,
        h: Hypergraph,
        sigma: Colouring,
        current: np.ndarray,
        u: int,
        stripped_round: int,
        round_of: np.ndarray,
    ) -> Optional[int]:
        own = int(current[u])
        incident = h.incident_edges(u)
        rows = h.edges[incident]
        # edges still present in H'(stripped_round)
        present = np.all((round_of[rows] >= stripped_round) | (round_of[rows] < 0), axis=1)
        base = sigma.assignment[rows]

        def blocked(gamma: int) -> bool:
            for row, colours, alive in zip(rows, base, present):
                if not alive:
                    continue
                others = colours[row != u]
                if np.all(others == gamma):
                    return True
            return False

        def safe(gamma: int) -> bool:
            trial = current.copy()
            trial[u] = gamma
            return self._locally_proper(h, trial, u)

        for gamma in range(sigma.q):
            if gamma != int(sigma.assignment[u]) and gamma != own and not blocked(gamma):
                if safe(gamma):
                    return gamma
                break
        for gamma in range(sigma.q):
            if gamma != own and safe(gamma):
                return gamma
        return None

    def is_ell_frozen_exact(
        self, h: Hypergraph, sigma: Colouring, v: int, ell: int
    ) -> bool:
        """
        Breadth-first search over proper colourings from sigma, moving between
        colourings that differ in at most `ell` vertices. True iff every
        reachable colouring gives v the colour sigma gives it.
        """
        self._require_proper(h, sigma)
        if not 0 <= v < h.n:
            raise ValidationError(f"vertex {v} outside [0, {h.n})")
        if ell < 1:
            raise ValidationError(f"ell must be positive, got {ell}")
        q, n = sigma.q, h.n
        # the search enumerates every map, so both limits apply
        limit = min(settings.max_oracle_states, settings.max_enumeration_states)
        if q**n > limit:
            raise ResourceGuardError(
                f"q^n={q**n} exceeds the exact frozen-check limit {limit}",
                {"n": n, "q": q, "limit": limit},
            )

        proper = colouring_service.enumerate_proper(h, q).astype(np.int64)
        own = int(sigma.assignment[v])
        if ell >= n:
            return bool(np.all(proper[:, v] == own))

        powers = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
        codes = proper @ powers
        index_of = np.full(q**n, -1, dtype=np.int64)
        index_of[codes] = np.arange(codes.size)

        moves = [
            (np.array(subset), np.array(shift))
            for size in range(1, ell + 1)
            for subset in itertools.combinations(range(n), size)
            for shift in itertools.product(range(1, q), repeat=size)
        ]
        if len(moves) * codes.size > settings.max_flip_moves:
            raise ResourceGuardError(
                "flip-graph search exceeds max_flip_moves",
                {"moves": len(moves), "states": int(codes.size)},
            )

        visited = np.zeros(codes.size, dtype=bool)
        start = int(index_of[int(sigma.assignment @ powers)])
        visited[start] = True
        frontier = np.array([start])
        while frontier.size:
            digits = proper[frontier]
            reached = []
            for positions, shift in moves:
                old = digits[:, positions]
                delta = ((old + shift) % q - old) @ powers[positions]
                target = index_of[codes[frontier] + delta]
                reached.append(target[target >= 0])
            found = np.unique(np.concatenate(reached))
            found = found[~visited[found]]
            if np.any(proper[found, v] != own):
                return False
            visited[found] = True
            frontier = found
        return True

    def _core_essentials(
        self, h: Hypergraph, sigma: Colouring, trace: CoreTrace, T: Set[int]
    ) -> Dict[int, Dict[int, List[int]]]:
        """v -> gamma -> essential edges inside the core, for v in T."""
        core = set(trace.core.tolist())
        outside = sorted(T - core)
        if outside:
            raise ValidationError(
                "vertex set is not contained in the core", {"outside": outside[:20]}
            )
        alive = np.zeros(h.m, dtype=bool)
        alive[trace.surviving_edges] = True
        table: Dict[int, Dict[int, List[int]]] = {
            v: {g: [] for g in range(sigma.q) if g != int(sigma.assignment[v])} for v in T
        }
        ess_e, ess_v, ess_c = _essential_incidences(h, sigma)
        for e, u, g in zip(ess_e.tolist(), ess_v.tolist(), ess_c.tolist()):
            if u in table and alive[e]:
                table[u][g].append(e)
        return table

    def _psi(
        self, h: Hypergraph, essentials: Dict[int, Dict[int, List[int]]], T: Set[int]
    ) -> Dict[int, Dict[int, List[Tuple[int, List[int]]]]]:
        """For each v in T, the colours gamma with Psi_T(v, gamma) and their hits in T."""
        out: Dict[int, Dict[int, List[Tuple[int, List[int]]]]] = {}
        for v in T:
            out[v] = {}
            for gamma, edges in essentials[v].items():
                hits = []
                for e in edges:
                    inside = [int(u) for u in h.edges[e] if u != v and int(u) in T]
                    if not inside:
                        break
                    hits.append((e, inside))
                else:
                    out[v][gamma] = hits
        return out

    def is_flippable(
        self,
        h: Hypergraph,
        sigma: Colouring,
        T: Iterable[int],
        trace: Optional[CoreTrace] = None,
    ) -> bool:
        """Every v in T has a colour gamma whose core-essential edges all meet T - {v}."""
        members = set(int(v) for v in T)
        trace = trace or self.extract_core(h, sigma)
        psi = self._psi(h, self._core_essentials(h, sigma, trace, members), members)
        return all(psi[v] for v in members)

    def flip_digraph(
        self,
        h: Hypergraph,
        sigma: Colouring,
        T: Iterable[int],
        trace: Optional[CoreTrace] = None,
    ) -> FlipDigraph:
        """Arcs v -> u for each occurring Psi_T(v, gamma), essential edge and u hit."""
        members = set(int(v) for v in T)
        trace = trace or self.extract_core(h, sigma)
        psi = self._psi(h, self._core_essentials(h, sigma, trace, members), members)

        arcs: List[Tuple[int, int]] = []
        per_colour: Dict[int, Dict[int, int]] = {v: {} for v in members}
        for v in sorted(members):
            for gamma, hits in sorted(psi[v].items()):
                for _, inside in hits:
                    arcs.extend((v, u) for u in inside)
                per_colour[v][gamma] = sum(len(inside) for _, inside in hits)

        in_degree = {v: 0 for v in members}
        out_degree = {v: 0 for v in members}
        for v, u in arcs:
            out_degree[v] += 1
            in_degree[u] += 1
        return FlipDigraph(
            vertices=sorted(members),
            arcs=arcs,
            in_degree=in_degree,
            out_degree=out_degree,
            per_colour_out=per_colour,
        )

    def star_flippable_kernel(
        self,
        h: Hypergraph,
        sigma: Colouring,
        T: Iterable[int],
        recompute: bool = True,
        trace: Optional[CoreTrace] = None,
    ) -> List[int]:
        """
        Repeatedly drop vertices of in-degree 0 until none remain.

        With `recompute` the digraph is rebuilt on the survivors each pass;
        otherwise the arcs of D(T) are kept and restricted to the survivors.
        """
        trace = trace or self.extract_core(h, sigma)
        survivors = set(int(v) for v in T)
        frozen_arcs = None if recompute else self.flip_digraph(h, sigma, survivors, trace).arcs

        while survivors:
            if recompute:
                arcs = self.flip_digraph(h, sigma, survivors, trace).arcs
            else:
                arcs = [(v, u) for v, u in frozen_arcs if v in survivors and u in survivors]
            pointed = {u for _, u in arcs}
            sources = survivors - pointed
            if not sources:
                break
            survivors -= sources
        return sorted(survivors)


core_service = CoreService()
