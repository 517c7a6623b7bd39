"""Service for the closed-form and fixed-point threshold quantities."""

import math
from typing import List

import numpy as np
from scipy.optimize import brentq

from config.settings import settings
from exceptions import NumericalError, ValidationError
from models.schemas import FixedPoint, ModelParams, ThresholdReport, UpsilonValue
from utils.logger import get_logger

logger = get_logger(__name__)

# rho below this after convergence is reported as the zero fixed point
_ZERO_SNAP = 1e-10


def lambert_w_minus_one(z: float) -> float:
    """
    Non-principal real branch W_{-1} on [-1/e, 0), by Halley iteration.

    Seeded with the branch-point series near -1/e and with
    ln(-z) - ln(-ln(-z)) elsewhere.
    """
    branch = -1.0 / math.e
    if not branch - 1e-15 <= z < 0:
        raise ValidationError(f"W_-1 is real only on [-1/e, 0), got {z}")
    if z <= branch:
        return -1.0

    if z < -0.25:
        p = -math.sqrt(2.0 * (math.e * z + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    else:
        l1 = math.log(-z)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1

    for _ in range(100):
        ew = math.exp(w)
        residual = w * ew - z
        step = residual / (ew * (w + 1) - (w + 2) * residual / (2 * w + 2))
        w -= step
        if abs(step) <= 1e-15 * abs(w):
            break
    return w


class ThresholdService:
    """Service for alpha, h, lambda_r, c_r, c_cond and the core fixed point."""

    @staticmethod
    def _x(q: int, k: int) -> int:
        x = (q - 1) * (k - 1)
        if q < 2 or k < 2 or x <= 1:
            raise ValidationError(
                f"need (q-1)(k-1) > 1, got q={q} k={k}", {"q": q, "k": k}
            )
        return x

    def alpha(self, params: ModelParams) -> float:
        """Expected number of (v, gamma)-essential edges: ck / (q^{k-1} - 1)."""
        return params.c * params.k / (params.q ** (params.k - 1) - 1)

    def h(self, lam: float, q: int, k: int) -> float:
        """h(lambda) = lambda / (1 - e^{-lambda})^{(q-1)(k-1)}."""
        if lam <= 0:
            raise ValidationError(f"lambda must be positive, got {lam}")
        return lam / (-math.expm1(-lam)) ** self._x(q, k)

    def lambda_r(self, q: int, k: int) -> float:
        """
        Positive root of e^lambda - 1 = x lambda, the minimiser of h.

        Solved on [1, x^2] in the form lambda = ln(1 + x lambda) and checked
        against the W_{-1} expression.
        """
        x = self._x(q, k)
        root = brentq(
            lambda lam: lam - math.log1p(x * lam), 1.0, float(x * x), xtol=1e-15, rtol=1e-15
        )
        via_w = -lambert_w_minus_one(-math.exp(-1.0 / x) / x) - 1.0 / x
        if abs(root - via_w) > settings.threshold_tol * max(1.0, root):
            raise NumericalError(
                "root finding and W_-1 disagree on lambda_r",
                {"q": q, "k": k, "brentq": root, "lambert": via_w},
            )
        return root

    def alpha_r(self, q: int, k: int) -> float:
        return self.h(self.lambda_r(q, k), q, k)

    def c_r(self, q: int, k: int) -> float:
        """Exact threshold (q^{k-1} - 1) / k * h(lambda_r)."""
        return (q ** (k - 1) - 1) / k * self.alpha_r(q, k)

    def c_r_asymptotic(self, q: int, k: int) -> float:
        x = self._x(q, k)
        return q ** (k - 1) / k * (math.log(x) + math.log(math.log(x)) + 1)

    def c_cond(self, q: int, k: int) -> float:
        """Condensation threshold (q^{k-1} - 1/2) ln q - ln 2, without the o_q(1) term."""
        return (q ** (k - 1) - 0.5) * math.log(q) - math.log(2)

    def first_regime_bound(self, q: int, k: int) -> float:
        return (q ** (k - 1) - 1) * math.log(q)

    def lambda_r_gap(self, q: int, k: int) -> float:
        """lambda_r - (ln x + ln ln x)."""
        x = self._x(q, k)
        return self.lambda_r(q, k) - (math.log(x) + math.log(math.log(x)))

    def rho_r(self, q: int, k: int) -> float:
        return (-math.expm1(-self.lambda_r(q, k))) ** (q - 1)

    def _step(self, rho: float, alpha: float, q: int, k: int) -> float:
        return (-math.expm1(-alpha * rho ** (k - 1))) ** (q - 1)

    def fixed_point(self, params: ModelParams) -> FixedPoint:
        """
        Largest solution of rho = (1 - e^{-lambda})^{q-1}, lambda = alpha rho^{k-1},
        found by iterating from rho = 1.

        At c within `threshold_tol` of c_r the critical point (lambda_r, rho_r)
        is returned and flagged instead of iterated.
        """
        q, k = params.q, params.k
        alpha = self.alpha(params)
        if abs(params.c - self.c_r(q, k)) < settings.threshold_tol:
            lam_r = self.lambda_r(q, k)
            rho = self.rho_r(q, k)
            return FixedPoint(
                alpha=alpha, lam=lam_r, rho=rho, upsilon=rho,
                converged=True, iterations=0, at_threshold=True,
            )

        rho, iterations, converged = 1.0, 0, False
        while iterations < settings.fixed_point_max_iter:
            nxt = self._step(rho, alpha, q, k)
            iterations += 1
            if abs(nxt - rho) < settings.fixed_point_tol:
                rho, converged = nxt, True
                break
            rho = nxt
        if not converged:
            logger.warning(
                f"fixed point not converged after {iterations} iterations at {params.key()}"
            )
        if rho < _ZERO_SNAP:
            rho = 0.0
        lam = alpha * rho ** (k - 1)
        return FixedPoint(
            alpha=alpha, lam=lam, rho=rho, upsilon=self._upsilon_from(params, lam),
            converged=converged, iterations=iterations,
        )

    def fixed_point_trajectory(self, params: ModelParams, rounds: int) -> np.ndarray:
        """Iterates rho_0 = 1, rho_1, ..., rho_rounds."""
        if rounds < 0:
            raise ValidationError(f"rounds must be non-negative, got {rounds}")
        alpha = self.alpha(params)
        out = np.empty(rounds + 1)
        out[0] = 1.0
        for i in range(rounds):
            out[i + 1] = self._step(out[i], alpha, params.q, params.k)
        return out

    def _upsilon_from(self, params: ModelParams, lam: float) -> float:
        if lam <= 0 or params.c == 0:
            return 0.0
        base = (params.q ** (params.k - 1) - 1) * lam / (params.c * params.k)
        return min(1.0, base ** (1.0 / (params.k - 1)))

    def upsilon(self, params: ModelParams) -> UpsilonValue:
        """Limiting core fraction; undefined (0) when only the zero fixed point exists."""
        point = self.fixed_point(params)
        if point.lam <= 0:
            return UpsilonValue(value=0.0, defined=False)
        return UpsilonValue(value=self._upsilon_from(params, point.lam), defined=True)

    def threshold_report(self, q: int, k: int) -> ThresholdReport:
        lam = self.lambda_r(q, k)
        return ThresholdReport(
            q=q,
            k=k,
            lambda_r=lam,
            alpha_r=self.h(lam, q, k),
            c_r_exact=self.c_r(q, k),
            c_r_asymptotic=self.c_r_asymptotic(q, k),
            c_cond=self.c_cond(q, k),
            first_regime_bound=self.first_regime_bound(q, k),
            rho_r=self.rho_r(q, k),
            lambda_r_gap=self.lambda_r_gap(q, k),
        )

    def threshold_table(self, qs: List[int], ks: List[int]) -> List[ThresholdReport]:
        rows = [self.threshold_report(q, k) for q in qs for k in ks]
        logger.info(f"computed {len(rows)} threshold rows")
        return rows


threshold_service = ThresholdService()
