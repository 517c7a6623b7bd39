"""Tests for the rigidity threshold and the core fixed point."""

import math

import numpy as np
import pytest

from exceptions import ValidationError
from models.schemas import ModelParams
from services.threshold_service import lambert_w_minus_one, threshold_service

GRID = [(q, k) for q in range(3, 11) for k in range(3, 8)]


class TestLambertW:
    def test_branch_point(self):
        assert lambert_w_minus_one(-1 / math.e) == -1.0

    @pytest.mark.parametrize("z", [-0.367, -0.3, -0.2, -0.05, -1e-3, -1e-8])
    def test_inverts_w_exp_w(self, z):
        w = lambert_w_minus_one(z)
        assert w <= -1
        assert w * math.exp(w) == pytest.approx(z, rel=1e-12)

    @pytest.mark.parametrize("z", [-0.5, 0.0, 0.1])
    def test_outside_domain(self, z):
        with pytest.raises(ValidationError):
            lambert_w_minus_one(z)


class TestRigidityThreshold:
    def test_values_at_three_three(self):
        assert threshold_service.lambda_r(3, 3) == pytest.approx(2.336662, abs=1e-5)
        assert threshold_service.alpha_r(3, 3) == pytest.approx(3.50891, abs=1e-4)
        assert threshold_service.c_r(3, 3) == pytest.approx(9.360, abs=5e-3)
        assert threshold_service.rho_r(3, 3) == pytest.approx(0.81604, abs=1e-4)

    @pytest.mark.parametrize("q,k", GRID)
    def test_lambda_r_solves_its_equation(self, q, k):
        x = (q - 1) * (k - 1)
        lam = threshold_service.lambda_r(q, k)
        assert abs(math.expm1(lam) - x * lam) < 1e-10 * math.exp(lam)

    @pytest.mark.parametrize("q,k", GRID)
    def test_lambda_r_matches_lambert_w(self, q, k):
        x = (q - 1) * (k - 1)
        via_w = -lambert_w_minus_one(-math.exp(-1 / x) / x) - 1 / x
        assert threshold_service.lambda_r(q, k) == pytest.approx(via_w, abs=1e-9)

    def test_lambda_r_minimises_h(self):
        lam = threshold_service.lambda_r(3, 3)
        step = 1e-5
        derivative = (threshold_service.h(lam + step, 3, 3) - threshold_service.h(lam - step, 3, 3)) / (2 * step)
        assert abs(derivative) < 1e-6
        best = threshold_service.h(lam, 3, 3)
        for other in np.logspace(-3, 3, 200):
            assert threshold_service.h(float(other), 3, 3) >= best - 1e-12

    def test_h_values(self):
        assert threshold_service.h(math.log(2), 3, 3) == pytest.approx(16 * math.log(2))
        with pytest.raises(ValidationError):
            threshold_service.h(-1.0, 3, 3)

    def test_asymptotic_gap_shrinks(self):
        # x = 10^2, 10^3, 10^4
        gaps = [
            threshold_service.lambda_r_gap(11, 11),
            threshold_service.lambda_r_gap(11, 101),
            threshold_service.lambda_r_gap(101, 101),
        ]
        assert gaps[0] > gaps[1] > gaps[2] > 0

    def test_lambda_r_tracks_log_x(self):
        x = 100 * 100
        lam = threshold_service.lambda_r(101, 101)
        assert lam == pytest.approx(math.log(x) + math.log(math.log(x)), rel=0.05)

    def test_asymptotic_and_condensation_values(self):
        assert threshold_service.c_r_asymptotic(3, 3) == pytest.approx(8.1388, abs=1e-3)
        assert threshold_service.c_cond(3, 3) == pytest.approx(8.645056, abs=1e-5)
        assert threshold_service.first_regime_bound(3, 3) == pytest.approx(8 * math.log(3))

    def test_condensation_grows_with_q_and_k(self):
        assert threshold_service.c_cond(4, 3) > threshold_service.c_cond(3, 3)
        assert threshold_service.c_cond(3, 4) > threshold_service.c_cond(3, 3)

    def test_report_and_table(self):
        table = threshold_service.threshold_table([3, 4], [3])
        assert [(r.q, r.k) for r in table] == [(3, 3), (4, 3)]
        assert table[0].c_r_exact == pytest.approx(threshold_service.c_r(3, 3))
        assert table[0].c_r_exact > table[0].c_cond


class TestFixedPoint:
    def test_alpha(self):
        assert threshold_service.alpha(ModelParams(q=3, k=3, c=12.0)) == pytest.approx(4.5)

    def test_above_threshold(self):
        point = threshold_service.fixed_point(ModelParams(q=3, k=3, c=12.0))
        assert point.converged
        assert point.lam == pytest.approx(4.2487, abs=2e-3)
        assert point.rho == pytest.approx(0.9717, abs=1e-3)
        assert point.lam == pytest.approx(point.alpha * point.rho**2, rel=1e-12)

    def test_below_threshold(self):
        point = threshold_service.fixed_point(ModelParams(q=3, k=3, c=5.0))
        assert point.rho == 0.0
        assert point.lam == 0.0
        upsilon = threshold_service.upsilon(ModelParams(q=3, k=3, c=5.0))
        assert not upsilon.defined

    def test_at_threshold(self):
        params = ModelParams(q=3, k=3, c=threshold_service.c_r(3, 3))
        point = threshold_service.fixed_point(params)
        assert point.at_threshold
        assert point.rho == pytest.approx(0.81604, abs=1e-4)

    def test_largest_root(self):
        params = ModelParams(q=3, k=3, c=12.0)
        point = threshold_service.fixed_point(params)
        for lam in np.linspace(point.lam + 1e-6, 50.0, 500):
            assert lam - point.alpha * (-math.expm1(-lam)) ** 4 > 0

    @pytest.mark.parametrize("q,k", [(3, 3), (4, 3), (3, 4), (5, 5)])
    def test_upsilon_equals_rho(self, q, k):
        params = ModelParams(q=q, k=k, c=2 * threshold_service.c_r(q, k))
        point = threshold_service.fixed_point(params)
        upsilon = threshold_service.upsilon(params)
        assert upsilon.defined
        assert upsilon.value == pytest.approx(point.rho, abs=1e-10)

    def test_trajectory_decreases(self):
        trajectory = threshold_service.fixed_point_trajectory(ModelParams(q=3, k=3, c=12.0), 40)
        assert trajectory[0] == 1.0
        assert np.all(np.diff(trajectory) <= 1e-15)

    def test_serializes_lambda_alias(self):
        point = threshold_service.fixed_point(ModelParams(q=3, k=3, c=12.0))
        assert "lambda" in point.model_dump(by_alias=True)
