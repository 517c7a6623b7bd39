"""Service for colourings: properness, densities, overlaps and exact oracles."""

import itertools
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, sqrt
from typing import Dict, List, Tuple

import numpy as np

from config.settings import settings
from exceptions import (
    GenerationError,
    ResourceGuardError,
    UncolourableError,
    ValidationError,
)
from models.schemas import (
    ColourDensity,
    Colouring,
    Hypergraph,
    ModelParams,
    OverlapMatrix,
)
from services.hypergraph_service import hypergraph_service
from utils.logger import get_logger

logger = get_logger(__name__)

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)

TABLE_CACHE_SIZE = 4
MONO_BITS_CACHE_SIZE = 1024


class ColouringTable:
    """
    All q^n maps [n] -> [q] in lexicographic order (vertex 0 most significant),
    with cached per-edge monochromatic bitmasks for fast exact counting.
    """

    def __init__(self, n: int, q: int):
        states = q**n
        if states > settings.max_enumeration_states:
            raise ResourceGuardError(
                f"q^n={states} exceeds max_enumeration_states="
                f"{settings.max_enumeration_states}",
                {"n": n, "q": q},
            )
        self.n = n
        self.q = q
        codes = np.arange(states, dtype=np.int64)
        powers = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
        self.maps = ((codes[:, None] // powers[None, :]) % q).astype(np.int8)
        self.mono_bits = lru_cache(maxsize=MONO_BITS_CACHE_SIZE)(self._mono_bits)

    @property
    def states(self) -> int:
        return int(self.maps.shape[0])

    def _mono_bits(self, edge: Tuple[int, ...]) -> np.ndarray:
        cols = self.maps[:, list(edge)]
        return np.packbits(np.all(cols == cols[:, :1], axis=1))

    def improper_bits(self, h: Hypergraph) -> np.ndarray:
        acc = np.zeros((self.states + 7) // 8, dtype=np.uint8)
        for row in h.edges.tolist():
            np.bitwise_or(acc, self.mono_bits(tuple(row)), out=acc)
        return acc

    def count_proper(self, h: Hypergraph) -> int:
        improper = int(_POPCOUNT[self.improper_bits(h)].sum(dtype=np.int64))
        return self.states - improper

    def proper_maps(self, h: Hypergraph) -> np.ndarray:
        improper = np.unpackbits(self.improper_bits(h), count=self.states).astype(bool)
        return self.maps[~improper]


class ColouringService:
    """Service for colouring predicates, statistics and exact oracles."""

    def __init__(self):
        self.table = lru_cache(maxsize=TABLE_CACHE_SIZE)(ColouringTable)

    @staticmethod
    def _check_dims(h: Hypergraph, sigma: Colouring) -> None:
        if sigma.n != h.n:
            raise ValidationError(
                f"colouring has {sigma.n} vertices, hypergraph has {h.n}"
            )

    def is_proper(self, h: Hypergraph, sigma: Colouring) -> bool:
        """True iff every edge carries at least two colours."""
        self._check_dims(h, sigma)
        if h.m == 0:
            return True
        colours = sigma.assignment[h.edges]
        return bool(np.all(np.any(colours != colours[:, :1], axis=1)))

    def mono_count(self, sigma: Colouring, k: int) -> int:
        """F(sigma): monochromatic k-subsets of the complete k-uniform hypergraph."""
        return sum(comb(int(size), k) for size in sigma.class_sizes())

    def colour_density(self, sigma: Colouring) -> ColourDensity:
        return ColourDensity(
            counts=[int(x) for x in sigma.class_sizes()], n=sigma.n
        )

    def overlap(self, sigma: Colouring, tau: Colouring) -> OverlapMatrix:
        if sigma.n != tau.n or sigma.q != tau.q:
            raise ValidationError(
                "overlap needs colourings of equal length and colour count",
                {"n": [sigma.n, tau.n], "q": [sigma.q, tau.q]},
            )
        q = sigma.q
        flat = np.bincount(
            sigma.assignment * q + tau.assignment, minlength=q * q
        ).reshape(q, q)
        return OverlapMatrix(counts=flat.tolist(), n=sigma.n)

    def is_balanced(self, sigma: Colouring, omega: float) -> bool:
        """(omega, n)-balance: |rho_i - 1/q| <= 1 / (omega sqrt(n)) for every colour."""
        if omega <= 0:
            raise ValidationError(f"omega must be positive, got {omega}")
        rho = self.colour_density(sigma).rho
        return bool(np.all(np.abs(rho - 1.0 / sigma.q) <= 1.0 / (omega * sqrt(sigma.n))))

    def balanced_map(self, n: int, q: int, seed: int) -> Colouring:
        """A uniformly shuffled map whose class sizes differ by at most one."""
        rng = np.random.default_rng(seed)
        base = np.arange(n, dtype=np.int64) % q
        return Colouring(q=q, assignment=rng.permutation(base))

    def count_colourings_exact(self, h: Hypergraph, q: int) -> int:
        """
        Count proper q-colourings by backtracking.

        Vertices are assigned in order of decreasing degree; an edge is checked
        once its last vertex is coloured. New colours are introduced in order and
        weighted by the number of ways to pick them, and isolated vertices
        contribute a factor q each.

        Raises:
            ResourceGuardError: above `max_oracle_vertices`
        """
        self._guard_oracle(h)
        if q < 1:
            raise ValidationError(f"q must be positive, got {q}")
        return self._backtrack(h, q, fixed={}, symmetric=True)

    def _guard_oracle(self, h: Hypergraph) -> None:
        if h.n > settings.max_oracle_vertices:
            raise ResourceGuardError(
                f"n={h.n} exceeds max_oracle_vertices={settings.max_oracle_vertices}",
                {"n": h.n},
            )

    def _backtrack(
        self, h: Hypergraph, q: int, fixed: Dict[int, int], symmetric: bool
    ) -> int:
        degrees = h.degrees
        free_isolated = sum(
            1 for v in range(h.n) if degrees[v] == 0 and v not in fixed
        )
        order = sorted(
            (v for v in range(h.n) if degrees[v] > 0 or v in fixed),
            key=lambda v: (v not in fixed, -int(degrees[v]), v),
        )
        position = {v: i for i, v in enumerate(order)}
        checks: List[List[List[int]]] = [[] for _ in order]
        for row in h.edges.tolist():
            last = max(row, key=lambda u: position[u])
            checks[position[last]].append(row)

        colour = [-1] * h.n
        symmetric = symmetric and not fixed

        def rec(i: int, used: int) -> int:
            if i == len(order):
                return 1
            v = order[i]
            if v in fixed:
                candidates = [fixed[v]]
            elif symmetric:
                candidates = range(min(used + 1, q))
            else:
                candidates = range(q)
            total = 0
            for col in candidates:
                colour[v] = col
                if any(all(colour[u] == col for u in row) for row in checks[i]):
                    continue
                if symmetric and col == used:
                    total += (q - used) * rec(i + 1, used + 1)
                else:
                    total += rec(i + 1, used)
            colour[v] = -1
            return total

        return rec(0, 0) * q**free_isolated

    def count_colourings_table(self, h: Hypergraph, q: int) -> int:
        """Exact count through the enumerated map table (q^n small)."""
        return self.table(h.n, q).count_proper(h)

    def enumerate_proper(self, h: Hypergraph, q: int) -> np.ndarray:
        """All proper colourings in lexicographic order, one per row."""
        return self.table(h.n, q).proper_maps(h)

    def sample_uniform_colouring(self, h: Hypergraph, q: int, seed: int) -> Colouring:
        """
        Uniform proper colouring: draw a rank r < Z and select the r-th proper
        colouring in lexicographic order.

        Raises:
            UncolourableError: if h has no proper q-colouring
        """
        rng = np.random.default_rng(seed)
        if q**h.n <= settings.max_enumeration_states:
            proper = self.enumerate_proper(h, q)
            if proper.shape[0] == 0:
                raise UncolourableError(f"no proper {q}-colouring exists", {"n": h.n})
            rank = int(rng.integers(proper.shape[0]))
            return Colouring(q=q, assignment=proper[rank])

        self._guard_oracle(h)
        total = self._backtrack(h, q, fixed={}, symmetric=True)
        if total == 0:
            raise UncolourableError(f"no proper {q}-colouring exists", {"n": h.n})
        rank = int(rng.integers(total))
        fixed: Dict[int, int] = {}
        for v in range(h.n):
            for col in range(q):
                fixed[v] = col
                completions = self._backtrack(h, q, fixed=fixed, symmetric=False)
                if rank < completions:
                    break
                rank -= completions
        return Colouring(q=q, assignment=[fixed[v] for v in range(h.n)])

    def sample_planted_map(self, n: int, q: int, k: int, m: int, seed: int) -> Colouring:
        """
        Uniform map with F(sigma) <= C(n,k) - m, by rejection from uniform maps.

        Raises:
            GenerationError: when no admissible map exists or the retry cap is hit
        """
        if n < 1 or q < 1 or k < 1 or m < 0:
            raise ValidationError("n, q, k must be positive and m non-negative")
        budget = comb(n, k) - m
        if budget < 0 or (q == 1 and comb(n, k) > budget):
            raise GenerationError(
                "no admissible planted map for these parameters",
                {"n": n, "q": q, "k": k, "m": m},
            )

        rng = np.random.default_rng(seed)
        batch = max(1, min(1024, 1_000_000 // n))
        attempts = 0
        while attempts < settings.planted_map_max_attempts:
            draws = rng.integers(0, q, size=(batch, n))
            for row in draws:
                attempts += 1
                sizes = np.bincount(row, minlength=q)
                if sum(comb(int(s), k) for s in sizes) <= budget:
                    logger.debug(f"planted map accepted after {attempts} attempts")
                    return Colouring(q=q, assignment=row)
                if attempts >= settings.planted_map_max_attempts:
                    break
        raise GenerationError(
            f"no admissible map after {attempts} attempts",
            {"n": n, "q": q, "k": k, "m": m},
        )

    def expected_colourings_exact(self, n: int, q: int, k: int, m: int) -> Fraction:
        """
        E[Z_q] under the with-replacement model, summed over class-size compositions:
        sum multinomial(n; a) * (1 - F(a)/C(n,k))^m.
        """
        total = comb(n, k)
        numerator = 0
        for sizes in _compositions(n, q):
            mono = sum(comb(a, k) for a in sizes)
            numerator += _multinomial(n, sizes) * (total - mono) ** m
        return Fraction(numerator, total**m)

    def sample_random_colouring_pair(
        self, params: ModelParams, seed: int, max_attempts: int = 1000
    ) -> Tuple[Hypergraph, Colouring]:
        """
        Random colouring model: a simple hypergraph conditioned on being
        colourable, then a uniform proper colouring of it (oracle scale).
        """
        rng = np.random.default_rng(seed)
        for attempt in range(max_attempts):
            h = hypergraph_service.gen_simple(params, int(rng.integers(2**62)))
            try:
                sigma = self.sample_uniform_colouring(h, params.q, int(rng.integers(2**62)))
            except UncolourableError:
                logger.debug(f"attempt {attempt}: uncolourable draw rejected")
                continue
            return h, sigma
        raise GenerationError(
            f"no colourable hypergraph in {max_attempts} draws", params.key()
        )


def _compositions(n: int, parts: int):
    """Weak compositions of n into `parts` non-negative integers."""
    for cuts in itertools.combinations(range(n + parts - 1), parts - 1):
        prev = -1
        sizes = []
        for cut in cuts:
            sizes.append(cut - prev - 1)
            prev = cut
        sizes.append(n + parts - 1 - prev - 1)
        yield sizes


def _multinomial(n: int, sizes) -> int:
    out = factorial(n)
    for a in sizes:
        out //= factorial(a)
    return out


colouring_service = ColouringService()
