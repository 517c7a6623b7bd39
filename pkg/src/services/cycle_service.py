"""Service for loose-cycle counts and their Poisson limit parameters."""

import math
from collections import Counter
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
from scipy import stats

from config.settings import settings
from exceptions import (
    DivergenceError,
    ResourceGuardError,
    StatisticsError,
    ValidationError,
)
from models.schemas import (
    CycleCensus,
    Hypergraph,
    ModelParams,
    PoissonFit,
    PoissonParams,
)
from utils.logger import get_logger

logger = get_logger(__name__)

MIN_FIT_SAMPLES = 100
MIN_BUCKET_EXPECTATION = 5.0


class CycleService:
    """Service for loose-cycle censuses and Poisson comparisons."""

    def count_loose_cycles(self, h: Hypergraph, L: int) -> CycleCensus:
        """
        Count unordered loose cycles of every length 2..L.

        A 2-cycle is a pair of edges sharing exactly two vertices. For l >= 3,
        cyclically consecutive edges share exactly one vertex and all other
        pairs are disjoint. Each cycle is enumerated from its least edge index
        in both directions and halved.

        Raises:
            ResourceGuardError: when the search exceeds `cycle_census_max_steps`
        """
        if L < 2:
            raise ValidationError(f"L must be at least 2, got {L}")

        counts: Dict[int, int] = {length: 0 for length in range(2, L + 1)}
        edge_sets = [frozenset(row) for row in h.edges.tolist()]
        incident: Dict[int, List[int]] = {}

        def edges_at(v: int) -> List[int]:
            cached = incident.get(v)
            if cached is None:
                cached = h.incident_edges(v).tolist()
                incident[v] = cached
            return cached

        for e, vertices in enumerate(edge_sets):
            shared = Counter(f for u in vertices for f in edges_at(u) if f > e)
            counts[2] += sum(1 for hits in shared.values() if hits == 2)

        if L >= 3:
            directed = Counter()
            steps = 0

            def extend(
                start: int, path: List[int], used: frozenset, entry: Optional[int], link0: Optional[int]
            ) -> None:
                nonlocal steps
                current = path[-1]
                for y in edge_sets[current]:
                    if y == entry:
                        continue
                    first_link = y if link0 is None else link0
                    for f in edges_at(y):
                        if f <= start or f in path:
                            continue
                        steps += 1
                        if steps > settings.cycle_census_max_steps:
                            raise ResourceGuardError(
                                "loose-cycle search exceeded cycle_census_max_steps",
                                {"steps": steps, "m": h.m, "L": L},
                            )
                        inter = edge_sets[f] & used
                        length = len(path) + 1
                        if length >= 3 and len(inter) == 2:
                            (z,) = inter - {y}
                            if z in edge_sets[start] and z != first_link:
                                directed[length] += 1
                        if len(inter) == 1 and length < L:
                            path.append(f)
                            extend(start, path, used | edge_sets[f], y, first_link)
                            path.pop()

            for s in range(h.m):
                extend(s, [s], edge_sets[s], None, None)

            for length, found in directed.items():
                counts[length] = found // 2
            logger.debug(f"loose-cycle search used {steps} extensions")

        return CycleCensus(max_length=L, counts=counts)

    def poisson_params(self, params: ModelParams, L: int) -> List[PoissonParams]:
        """lambda_l = (ck(k-1))^l / (2l), delta_l = (-1)^l (q-1) / (q^{k-1}-1)^l."""
        if L < 2:
            raise ValidationError(f"L must be at least 2, got {L}")
        growth = params.c * params.k * (params.k - 1)
        base = params.q ** (params.k - 1) - 1
        out = []
        for length in range(2, L + 1):
            lam = growth**length / (2 * length)
            delta = (-1) ** length * (params.q - 1) / base**length
            out.append(
                PoissonParams(
                    length=length, lambda_ell=lam, delta_ell=delta, mu_ell=lam * (1 + delta)
                )
            )
        return out

    @staticmethod
    def _ratio(params: ModelParams) -> float:
        return params.c * params.k * (params.k - 1) / (params.q ** (params.k - 1) - 1) ** 2

    def sum_lambda_delta_sq(
        self,
        params: ModelParams,
        mode: Literal["closed", "series"] = "closed",
        L: Optional[int] = None,
    ) -> float:
        """
        Sum of lambda_l delta_l^2 over l >= 2.

        `closed` returns ((q-1)^2 / 2) * (-ln(1 - r) - r) with
        r = ck(k-1) / (q^{k-1}-1)^2; `series` sums the terms up to L, or until
        they stop contributing when L is None.

        Raises:
            DivergenceError: when r >= 1
        """
        r = self._ratio(params)
        if r >= 1:
            raise DivergenceError(
                f"ck(k-1) >= (q^(k-1)-1)^2 (ratio {r:.6g}); the series diverges",
                params.key(),
            )
        if params.c == 0:
            return 0.0
        scale = (params.q - 1) ** 2 / 2
        if mode == "closed":
            return scale * (-math.log1p(-r) - r)
        if mode != "series":
            raise ValidationError(f"unknown mode {mode!r}")

        log_growth = math.log(params.c * params.k * (params.k - 1))
        log_base = math.log(params.q ** (params.k - 1) - 1)
        log_spread = 2 * math.log(params.q - 1)

        def terms(lengths: np.ndarray) -> np.ndarray:
            # lambda_l * delta_l^2 in log space; the two factors overflow separately
            return np.exp(
                lengths * log_growth
                - np.log(2 * lengths)
                + log_spread
                - 2 * lengths * log_base
            )

        if L is not None:
            if L < 2:
                raise ValidationError(f"L must be at least 2, got {L}")
            return math.fsum(terms(np.arange(2, L + 1, dtype=float)))

        # terms are positive
        total = 0.0
        start = 2
        chunk = 4096
        while start < 10_000_000:
            block = terms(np.arange(start, start + chunk, dtype=float))
            total += math.fsum(block)
            if block[-1] <= 1e-18 * max(total, 1e-300):
                break
            start += chunk
        return total

    def poisson_fit(self, samples: Sequence[int], lam: float) -> PoissonFit:
        """
        Chi-square goodness of fit against Poisson(lam), with adjacent values
        merged until every bucket expects at least five observations.

        Raises:
            StatisticsError: fewer than 100 samples or fewer than two buckets
        """
        values = np.asarray(samples, dtype=np.int64)
        if values.size < MIN_FIT_SAMPLES:
            raise StatisticsError(
                f"need at least {MIN_FIT_SAMPLES} samples, got {values.size}"
            )
        if lam <= 0:
            raise ValidationError(f"lambda must be positive, got {lam}")
        if values.min() < 0:
            raise StatisticsError("Poisson samples must be non-negative")

        total = values.size
        top = int(max(values.max(), stats.poisson.ppf(1 - 1e-12, lam))) + 1
        support = np.arange(top)
        expected = total * stats.poisson.pmf(support, lam)
        tail = total * stats.poisson.sf(top - 1, lam)
        observed = np.bincount(values, minlength=top)[:top]

        f_exp: List[float] = []
        f_obs: List[int] = []
        acc_e, acc_o = 0.0, 0
        for j in range(top):
            acc_e += expected[j]
            acc_o += int(observed[j])
            if acc_e >= MIN_BUCKET_EXPECTATION:
                f_exp.append(acc_e)
                f_obs.append(acc_o)
                acc_e, acc_o = 0.0, 0
        # Leftover values plus the upper tail
        acc_e += tail
        if f_exp and acc_e < MIN_BUCKET_EXPECTATION:
            f_exp[-1] += acc_e
            f_obs[-1] += acc_o
        else:
            f_exp.append(acc_e)
            f_obs.append(acc_o)

        if len(f_exp) < 2:
            raise StatisticsError(
                "degenerate fit: fewer than two buckets", {"lambda": lam, "samples": total}
            )

        exp_arr = np.asarray(f_exp)
        exp_arr *= total / exp_arr.sum()
        chi2, p_value = stats.chisquare(np.asarray(f_obs, dtype=float), exp_arr)
        return PoissonFit(
            lam=lam,
            samples=int(total),
            mean=float(values.mean()),
            chi2=float(chi2),
            dof=len(f_exp) - 1,
            p_value=float(p_value),
        )

    def cycle_conditioning_log_weight(
        self, census: CycleCensus, params: ModelParams
    ) -> float:
        """ln prod_l (1 + delta_l)^{C_l} exp(-lambda_l delta_l) over the census lengths."""
        total = 0.0
        for p in self.poisson_params(params, census.max_length):
            total += census.count(p.length) * math.log1p(p.delta_ell) - p.lambda_ell * p.delta_ell
        return total


cycle_service = CycleService()
