"""Tests for loose-cycle counting and the Poisson limit parameters."""

import math

import numpy as np
import pytest

from exceptions import DivergenceError, StatisticsError, ValidationError
from models.schemas import CycleCensus, Hypergraph, ModelParams
from services.cycle_service import cycle_service
from services.hypergraph_service import hypergraph_service


def census(edges, n, L=4):
    h = Hypergraph.from_edges(n, 3, edges, multi_edges_allowed=True)
    return cycle_service.count_loose_cycles(h, L)


class TestCounting:
    def test_two_cycle(self):
        found = census([[0, 1, 2], [1, 2, 3]], 4)
        assert found.count(2) == 1
        assert found.count(3) == 0

    def test_duplicate_edges_are_not_two_cycles(self):
        assert census([[0, 1, 2], [0, 1, 2]], 3).count(2) == 0

    def test_loose_triangle(self):
        found = census([[0, 1, 2], [2, 3, 4], [4, 5, 0]], 6)
        assert found.count(3) == 1
        assert found.count(2) == 0

    def test_loose_four_cycle(self):
        found = census([[0, 1, 2], [2, 3, 4], [4, 5, 6], [6, 7, 0]], 8)
        assert found.count(4) == 1
        assert found.count(3) == 0

    def test_star_has_no_cycles(self):
        found = census([[0, 1, 2], [0, 3, 4], [0, 5, 6]], 7)
        assert found.counts == {2: 0, 3: 0, 4: 0}

    def test_triangle_with_a_double_overlap_is_not_loose(self):
        found = census([[0, 1, 2], [1, 2, 3], [3, 4, 0]], 5)
        assert found.count(2) == 1
        assert found.count(3) == 0

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_relabelling_leaves_the_census_unchanged(self, seed):
        params = ModelParams(q=3, k=3, c=0.8, n=60)
        h = hypergraph_service.gen_multi(params, seed)
        perm = np.random.default_rng(seed).permutation(h.n)
        relabelled = Hypergraph.from_edges(h.n, 3, perm[h.edges].tolist(), multi_edges_allowed=True)
        assert cycle_service.count_loose_cycles(relabelled, 4) == cycle_service.count_loose_cycles(h, 4)

    def test_censuses_add_over_disjoint_unions(self):
        first = hypergraph_service.gen_multi(ModelParams(q=3, k=3, c=0.8, n=50), 3)
        second = hypergraph_service.gen_multi(ModelParams(q=3, k=3, c=1.0, n=40), 4)
        union = Hypergraph.from_edges(
            90, 3, first.edges.tolist() + (second.edges + 50).tolist(), multi_edges_allowed=True
        )
        a, b = cycle_service.count_loose_cycles(first, 4), cycle_service.count_loose_cycles(second, 4)
        joint = cycle_service.count_loose_cycles(union, 4)
        assert joint.counts == {ell: a.count(ell) + b.count(ell) for ell in range(2, 5)}

    def test_minimum_length(self):
        with pytest.raises(ValidationError):
            census([[0, 1, 2]], 3, L=1)

    def test_random_mean_two_cycles(self):
        params = ModelParams(q=3, k=3, c=0.5, n=2000)
        counts = [
            cycle_service.count_loose_cycles(hypergraph_service.gen_multi(params, seed), 2).count(2)
            for seed in range(200)
        ]
        expected = cycle_service.poisson_params(params, 2)[0].lambda_ell
        se = math.sqrt(expected / len(counts))
        assert abs(np.mean(counts) - expected) < 4 * se


class TestPoissonParams:
    def test_lambda_and_mu(self):
        params = ModelParams(q=3, k=3, c=0.5)
        two, three = cycle_service.poisson_params(params, 3)
        assert two.lambda_ell == pytest.approx(2.25)
        assert two.delta_ell == pytest.approx(2 / 64)
        assert two.mu_ell == pytest.approx(2.25 * (1 + 1 / 32))
        assert three.lambda_ell == pytest.approx(27 / 6)
        assert three.delta_ell == pytest.approx(-2 / 512)

    @pytest.mark.parametrize("c", [10.0, 10.56])
    def test_series_converges_near_the_radius(self, c):
        params = ModelParams(q=3, k=3, c=c)
        closed = cycle_service.sum_lambda_delta_sq(params, "closed")
        assert cycle_service.sum_lambda_delta_sq(params, "series") == pytest.approx(closed, rel=1e-9)

    @pytest.mark.parametrize("q", [3, 4, 5])
    @pytest.mark.parametrize("k", [3, 4])
    @pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
    def test_closed_form_matches_series(self, q, k, c):
        params = ModelParams(q=q, k=k, c=c)
        closed = cycle_service.sum_lambda_delta_sq(params, "closed")
        series = cycle_service.sum_lambda_delta_sq(params, "series")
        assert closed == pytest.approx(series, rel=1e-10, abs=1e-15)

    def test_truncated_series_is_smaller(self):
        params = ModelParams(q=3, k=3, c=3.0)
        assert cycle_service.sum_lambda_delta_sq(params, "series", L=3) < cycle_service.sum_lambda_delta_sq(params)

    def test_zero_density(self):
        assert cycle_service.sum_lambda_delta_sq(ModelParams(q=3, k=3, c=0.0)) == 0.0

    def test_divergence(self):
        with pytest.raises(DivergenceError):
            cycle_service.sum_lambda_delta_sq(ModelParams(q=3, k=3, c=11.0))

    def test_conditioning_weight_of_empty_census(self):
        params = ModelParams(q=3, k=3, c=0.5)
        empty = CycleCensus(max_length=3, counts={2: 0, 3: 0})
        expected = -sum(p.lambda_ell * p.delta_ell for p in cycle_service.poisson_params(params, 3))
        assert cycle_service.cycle_conditioning_log_weight(empty, params) == pytest.approx(expected)


class TestPoissonFit:
    def test_accepts_poisson_samples(self):
        samples = np.random.default_rng(0).poisson(2.25, size=2000)
        fit = cycle_service.poisson_fit(samples.tolist(), 2.25)
        assert fit.samples == 2000
        assert fit.p_value > 1e-3
        assert fit.mean == pytest.approx(2.25, abs=0.15)

    def test_rejects_wrong_rate(self):
        samples = np.random.default_rng(1).poisson(2.25, size=2000)
        assert cycle_service.poisson_fit(samples.tolist(), 5.0).p_value < 1e-6

    def test_needs_enough_samples(self):
        with pytest.raises(StatisticsError):
            cycle_service.poisson_fit([1] * 50, 1.0)

    def test_needs_positive_rate(self):
        with pytest.raises(ValidationError):
            cycle_service.poisson_fit([1] * 200, 0.0)
