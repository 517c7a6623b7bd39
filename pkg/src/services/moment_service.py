"""Service for the first/second-moment functionals over densities and overlaps."""

import math
from collections import defaultdict
from fractions import Fraction
from math import comb
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy.special import entr

from config.settings import settings
from exceptions import (
    DivergenceError,
    NumericalError,
    ResourceGuardError,
    ValidationError,
)
from models.schemas import (
    ColourDensity,
    Hypergraph,
    LandscapeClassRow,
    LandscapeReport,
    ModelParams,
    MomentFunctions,
    OverlapClass,
    OverlapMatrix,
)
from services.cycle_service import cycle_service
from utils.logger import get_logger

logger = get_logger(__name__)

Density = Union[OverlapMatrix, ColourDensity, np.ndarray]

_SUM_TOL = 1e-9


def _as_array(rho: Density) -> np.ndarray:
    if isinstance(rho, (OverlapMatrix, ColourDensity)):
        arr = rho.rho
    else:
        arr = np.asarray(rho, dtype=float)
    if np.any(arr < -_SUM_TOL) or np.any(arr > 1 + _SUM_TOL):
        raise ValidationError("density entries must lie in [0, 1]")
    if abs(arr.sum() - 1.0) > _SUM_TOL:
        raise ValidationError(f"density entries must sum to 1, got {arr.sum():.12g}")
    return np.clip(arr, 0.0, 1.0)


def _square(rho: Density) -> np.ndarray:
    arr = _as_array(rho)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"expected a square overlap matrix, got shape {arr.shape}")
    return arr


def _multiset_arrangements(labels: Sequence[int]) -> np.ndarray:
    """All distinct orderings of a multiset of labels, one per row."""
    counts: Dict[int, int] = defaultdict(int)
    for label in labels:
        counts[label] += 1
    keys = sorted(counts)
    n = len(labels)
    rows: List[List[int]] = []
    current: List[int] = []

    def rec() -> None:
        if len(current) == n:
            rows.append(list(current))
            return
        for key in keys:
            if counts[key]:
                counts[key] -= 1
                current.append(key)
                rec()
                current.pop()
                counts[key] += 1

    rec()
    return np.array(rows, dtype=np.int64).reshape(len(rows), n)


class MomentService:
    """Service for H, E, f, the expansion at rho_bar and the moment exponents."""

    def entropy(self, rho: Density) -> float:
        """-sum rho ln rho with 0 ln 0 = 0."""
        return float(entr(_as_array(rho)).sum())

    def energy(self, rho: Density, params: ModelParams) -> float:
        """c ln(1 - 2 q^{1-k} + ||rho||_k^k) for an overlap matrix with uniform marginals."""
        arr = _square(rho)
        arg = 1.0 - 2.0 * params.q ** (1 - params.k) + float(np.sum(arr**params.k))
        if arg <= 0:
            raise NumericalError(f"energy log argument {arg:.6g} is not positive", params.key())
        return params.c * math.log(arg)

    def f(self, rho: Density, params: ModelParams) -> float:
        return self.entropy(rho) + self.energy(rho, params)

    def rho_bar(self, q: int) -> np.ndarray:
        return np.full((q, q), 1.0 / (q * q))

    def f_bar(self, params: ModelParams) -> float:
        """f(rho_bar) = 2 ln q + 2c ln(1 - q^{1-k})."""
        return 2 * math.log(params.q) + 2 * params.c * math.log1p(-(params.q ** (1 - params.k)))

    def psi(self, params: ModelParams) -> float:
        return 1.0 - params.c * params.k * (params.k - 1) / (params.q ** (params.k - 1) - 1) ** 2

    def gamma(self, params: ModelParams) -> float:
        """(ck(k-1)/2)(q-1)(2q^{k-1} - q - 1) / (q^{k-1} - 1)^2."""
        q, k, c = params.q, params.k, params.c
        base = q ** (k - 1) - 1
        return c * k * (k - 1) / 2 * (q - 1) * (2 * q ** (k - 1) - q - 1) / base**2

    def kappa(self, q: int, k: int) -> float:
        return q ** (1 - k) * math.log(q) ** 20

    def moment_functions(self, params: ModelParams) -> MomentFunctions:
        psi = self.psi(params)
        return MomentFunctions(
            params=params,
            f_bar=self.f_bar(params),
            quadratic_coefficient=params.q**2 / 2 * psi,
            gamma=self.gamma(params),
            psi=psi,
            kappa=self.kappa(params.q, params.k),
        )

    def quadratic_expansion_check(
        self, params: ModelParams, direction: np.ndarray, t: float
    ) -> Tuple[float, float]:
        """
        (f(rho_bar + t D) - f(rho_bar), -(q^2/2) Psi t^2 ||D||^2) for a direction D
        with zero row and column sums.
        """
        q = params.q
        d = np.asarray(direction, dtype=float)
        if d.shape != (q, q):
            raise ValidationError(f"direction must be {q}x{q}, got {d.shape}")
        if np.abs(d.sum(axis=0)).max() > 1e-12 or np.abs(d.sum(axis=1)).max() > 1e-12:
            raise ValidationError("direction must have zero row and column sums")
        point = self.rho_bar(q) + t * d
        if np.any(point <= 0):
            raise ValidationError(f"step t={t} leaves the simplex interior")
        exact = self.f(point, params) - self.f_bar(params)
        predicted = -(q**2) / 2 * self.psi(params) * t * t * float(np.sum(d * d))
        return exact, predicted

    def first_moment_log(self, params: ModelParams, n: int, refined: bool = False) -> float:
        """
        n ln q + m ln(1 - q^{1-k}) with m = floor(cn).

        `refined` adds the balanced-count correction ck(k-1)(q-1) / (2(q^{k-1}-1))
        and the local-limit prefactor ((1-q)/2) ln(2 pi n) + (q/2) ln q, i.e. the
        log expected count per balanced class-size vector.
        """
        q, k = params.q, params.k
        m = ModelParams(q=q, k=k, c=params.c, n=n).m
        out = n * math.log(q) + m * math.log1p(-(q ** (1 - k)))
        if refined:
            out += params.c * k * (k - 1) * (q - 1) / (2 * (q ** (k - 1) - 1))
            out += (1 - q) / 2 * math.log(2 * math.pi * n) + q / 2 * math.log(q)
        return out

    def pair_moment_exponent(self, rho: Density, params: ModelParams) -> float:
        """H(rho) + c ln(1 - ||rho_row||_k^k - ||rho_col||_k^k + ||rho||_k^k)."""
        arr = _square(rho)
        k = params.k
        arg = (
            1.0
            - float(np.sum(arr.sum(axis=1) ** k))
            - float(np.sum(arr.sum(axis=0) ** k))
            + float(np.sum(arr**k))
        )
        if arg <= 0:
            raise NumericalError(f"pair-moment log argument {arg:.6g} is not positive", params.key())
        return float(entr(arr).sum()) + params.c * math.log(arg)

    def pair_moment_log(
        self, rho: Density, params: ModelParams, n: int, lower_order: bool = True
    ) -> float:
        """
        ln E[number of colouring pairs with overlap rho].

        With `lower_order` the multinomial prefactor and the (k-1)-norm correction
        are included; both need every entry of rho to be positive.
        """
        arr = _square(rho)
        out = n * self.pair_moment_exponent(arr, params)
        if not lower_order:
            return out
        if np.any(arr <= 0):
            raise NumericalError("lower-order terms need a strictly positive overlap matrix")
        q, k, c = params.q, params.k, params.c

        def norms(p: int) -> float:
            return (
                1.0
                - float(np.sum(arr.sum(axis=1) ** p))
                - float(np.sum(arr.sum(axis=0) ** p))
                + float(np.sum(arr**p))
            )

        out += 0.5 * math.log(2 * math.pi) + (1 - q * q) / 2 * math.log(n)
        out -= 0.5 * float(np.sum(np.log(2 * math.pi * arr)))
        out += c * k * (k - 1) / 2 * (1 - norms(k - 1) / norms(k))
        return out

    def second_moment_log(self, params: ModelParams, n: int) -> float:
        """
        n f(rho_bar) + Gamma - ((q-1)^2/2) ln Psi + (1-q) ln(2 pi n) + q ln q,
        the log second moment per squared balanced class-size vector.

        Raises:
            DivergenceError: when Psi <= 0
        """
        psi = self.psi(params)
        if psi <= 0:
            raise DivergenceError(f"Psi = {psi:.6g} <= 0", params.key())
        q = params.q
        return (
            n * self.f_bar(params)
            + self.gamma(params)
            - (q - 1) ** 2 / 2 * math.log(psi)
            + (1 - q) * math.log(2 * math.pi * n)
            + q * math.log(q)
        )

    def second_moment_ratio(self, params: ModelParams) -> float:
        """
        Limit of E[Z^2] / E[Z]^2 over balanced colourings,
        Psi^{-(q-1)^2/2} exp(-ck(k-1)(q-1)^2 / (2(q^{k-1}-1)^2)).

        The value assembled from the moment exponents is checked against the
        series of lambda_l delta_l^2 from the cycle counts.

        Raises:
            DivergenceError: when Psi <= 0
            NumericalError: when the two routes disagree beyond identity_tol
        """
        psi = self.psi(params)
        if psi <= 0:
            raise DivergenceError(f"Psi = {psi:.6g} <= 0", params.key())
        q, k, c = params.q, params.k, params.c
        first_correction = c * k * (k - 1) * (q - 1) / (2 * (q ** (k - 1) - 1))
        via_moments = self.gamma(params) - (q - 1) ** 2 / 2 * math.log(psi) - 2 * first_correction
        via_cycles = cycle_service.sum_lambda_delta_sq(params, mode="series")
        if abs(via_moments - via_cycles) > settings.identity_tol * max(1.0, abs(via_cycles)):
            raise NumericalError(
                "second-moment ratio disagrees with the cycle series",
                {"moments": via_moments, "cycles": via_cycles, **params.key()},
            )
        return math.exp(via_moments)

    def classify_overlap(self, rho: Density, params: ModelParams) -> OverlapClass:
        """
        Separable: no entry strictly inside (kappa/q, (1-kappa)/q).
        s-stable: exactly s entries above (1-kappa)/q; more than q is unstable.
        """
        arr = _square(rho)
        q = params.q
        kappa = self.kappa(q, params.k)
        low, high = kappa / q, (1 - kappa) / q
        separable = not bool(np.any((arr > low) & (arr < high)))
        stable = int(np.count_nonzero(arr > high))
        return OverlapClass(
            separable=separable,
            stable_entries=stable,
            s_stability=stable if stable <= q else "unstable",
            in_interior_set=bool(np.all(arr > q**-3)),
            kappa=kappa,
            degenerate=kappa >= 0.5,
        )

    def sinkhorn_overlap(
        self, matrix: np.ndarray, max_iter: int = 10_000, tol: float = 1e-13
    ) -> np.ndarray:
        """Scale a positive matrix to row and column sums 1/q."""
        arr = np.asarray(matrix, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or np.any(arr <= 0):
            raise ValidationError("Sinkhorn scaling needs a positive square matrix")
        q = arr.shape[0]
        target = 1.0 / q
        arr = arr / arr.sum()
        for _ in range(max_iter):
            arr *= (target / arr.sum(axis=1))[:, None]
            arr *= (target / arr.sum(axis=0))[None, :]
            if np.abs(arr.sum(axis=1) - target).max() < tol:
                break
        return arr / arr.sum()

    def permutation_path(self, q: int, perm: Sequence[int], t: float) -> np.ndarray:
        """(1 - t) rho_bar + (t/q) P for the permutation matrix P of `perm`."""
        if sorted(perm) != list(range(q)):
            raise ValidationError(f"not a permutation of range({q}): {list(perm)}")
        if not 0 <= t <= 1:
            raise ValidationError(f"t must lie in [0, 1], got {t}")
        p = np.zeros((q, q))
        p[np.arange(q), list(perm)] = 1.0
        return (1 - t) * self.rho_bar(q) + t / q * p

    def first_regime_upper_bound(self, rho: np.ndarray, params: ModelParams) -> float:
        """f(rho_bar) - ln(1 + (q^{2k-2}||rho||_k^k - 1)/(q^{k-1}-1)^2)((q^{k-1}-1) ln q - c)."""
        q, k = params.q, params.k
        base = q ** (k - 1) - 1
        spread = (q ** (2 * k - 2) * float(np.sum(rho**k)) - 1) / base**2
        return self.f_bar(params) - math.log1p(spread) * (base * math.log(q) - params.c)

    def landscape_scan(
        self,
        params: ModelParams,
        samples: int = 10_000,
        seed: int = 0,
        path_points: int = 50,
        permutations: int = 4,
    ) -> LandscapeReport:
        """
        Evaluate f - f(rho_bar) over Sinkhorn-scaled random matrices and over
        paths from rho_bar towards permutation overlaps, grouped by class.
        """
        q = params.q
        rng = np.random.default_rng(seed)
        f_bar = self.f_bar(params)
        check_bound = params.c < (q ** (params.k - 1) - 1) * math.log(q)

        probes: List[np.ndarray] = []
        for _ in range(samples):
            sharpness = rng.uniform(0.5, 12.0)
            probes.append(self.sinkhorn_overlap(rng.random((q, q)) ** sharpness + 1e-12))
        perms = [list(range(q))] + [rng.permutation(q).tolist() for _ in range(permutations - 1)]
        for perm in perms:
            for t in np.linspace(0.0, 1.0, path_points):
                probes.append(self.permutation_path(q, perm, float(t)))

        best: Dict[str, Tuple[float, np.ndarray, Union[int, str], int]] = {}
        violations = 0
        overall = -math.inf
        for rho in probes:
            gap = self.f(rho, params) - f_bar
            overall = max(overall, gap)
            label_info = self.classify_overlap(rho, params)
            label = label_info.label
            prev = best.get(label)
            count = prev[3] + 1 if prev else 1
            if prev is None or gap > prev[0]:
                best[label] = (gap, rho, label_info.s_stability, count)
            else:
                best[label] = (prev[0], prev[1], prev[2], count)
            if check_bound and gap + f_bar > self.first_regime_upper_bound(rho, params) + 1e-9:
                violations += 1

        if violations:
            logger.info(f"first-regime bound exceeded on {violations} of {len(probes)} probes")
        classes = [
            LandscapeClassRow(
                label=label,
                s_stability=s,
                samples=count,
                max_gap=gap,
                argmax=rho.ravel().tolist(),
            )
            for label, (gap, rho, s, count) in sorted(best.items())
        ]
        kappa = self.kappa(q, params.k)
        return LandscapeReport(
            params=params,
            f_bar=f_bar,
            samples=len(probes),
            max_gap=overall,
            classes=classes,
            bound_checked=check_bound,
            bound_violations=violations,
            kappa=kappa,
            degenerate=kappa >= 0.5,
        )

    def pair_overlap_count(self, h: Hypergraph, counts: Sequence[Sequence[int]]) -> int:
        """
        Number of ordered pairs (sigma, tau) of proper colourings of h whose
        overlap matrix equals `counts`.
        """
        n_ij = np.asarray(counts, dtype=np.int64)
        q = n_ij.shape[0]
        if n_ij.shape != (q, q) or n_ij.sum() != h.n or np.any(n_ij < 0):
            raise ValidationError("overlap counts must be a q x q table summing to n")
        sizes = n_ij.ravel()
        arrangements = math.factorial(h.n) // math.prod(math.factorial(int(s)) for s in sizes)
        if arrangements > settings.max_enumeration_states:
            raise ResourceGuardError(
                f"{arrangements} arrangements exceed max_enumeration_states",
                {"n": h.n, "q": q},
            )
        labels = np.repeat(np.arange(q * q), sizes)
        joint = _multiset_arrangements(labels.tolist())
        if h.m == 0:
            return int(joint.shape[0])
        ok = np.ones(joint.shape[0], dtype=bool)
        for colouring in (joint // q, joint % q):
            cols = colouring[:, h.edges]
            ok &= np.all(np.any(cols != cols[:, :, :1], axis=2), axis=1)
        return int(np.count_nonzero(ok))

    def expected_pair_overlap_count(
        self, counts: Sequence[Sequence[int]], k: int, m: int
    ) -> Fraction:
        """
        Exact E[pair_overlap_count] over m independent uniform k-subsets:
        multinomial(n; N) * ((C(n,k) - sum C(R_i,k) - sum C(S_j,k) + sum C(N_ij,k)) / C(n,k))^m.
        """
        n_ij = np.asarray(counts, dtype=np.int64)
        n = int(n_ij.sum())
        total = comb(n, k)
        rows = sum(comb(int(r), k) for r in n_ij.sum(axis=1))
        cols = sum(comb(int(s), k) for s in n_ij.sum(axis=0))
        both = sum(comb(int(x), k) for x in n_ij.ravel())
        multinomial = math.factorial(n) // math.prod(math.factorial(int(x)) for x in n_ij.ravel())
        return multinomial * Fraction(total - rows - cols + both, total) ** m


moment_service = MomentService()
