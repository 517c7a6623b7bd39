"""Tests for colouring predicates, statistics and the exact oracles."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from config.settings import settings
from exceptions import GenerationError, ResourceGuardError, UncolourableError, ValidationError
from models.schemas import Colouring, Hypergraph, ModelParams
from services.colouring_service import (
    MONO_BITS_CACHE_SIZE,
    TABLE_CACHE_SIZE,
    colouring_service,
)
from services.experiment_service import experiment_service
from services.hypergraph_service import hypergraph_service
from services.moment_service import moment_service


@pytest.fixture
def single_edge():
    return Hypergraph.from_edges(3, 3, [[0, 1, 2]])


@pytest.fixture
def complete_7():
    """Every 3-subset of 7 vertices; any 3-colouring has a class of size 3."""
    return Hypergraph.from_edges(7, 3, list(itertools.combinations(range(7), 3)))


class TestPredicates:
    def test_is_proper(self, single_edge):
        assert colouring_service.is_proper(single_edge, Colouring.of([0, 0, 1], 3))
        assert not colouring_service.is_proper(single_edge, Colouring.of([2, 2, 2], 3))

    def test_dimension_mismatch(self, single_edge):
        with pytest.raises(ValidationError):
            colouring_service.is_proper(single_edge, Colouring.of([0, 1], 3))

    def test_colours_out_of_range(self):
        with pytest.raises(ValidationError):
            Colouring.of([0, 3, 1], 3)

    def test_mono_count(self):
        sigma = Colouring.of([0, 0, 0, 0, 1, 1, 1, 2], 3)
        assert colouring_service.mono_count(sigma, 3) == 4 + 1

    def test_colour_density(self):
        density = colouring_service.colour_density(Colouring.of([0, 1, 1, 2], 3))
        assert density.counts == [1, 2, 1]
        assert density.rho.tolist() == [0.25, 0.5, 0.25]

    def test_overlap(self):
        sigma = Colouring.of([0, 0, 1, 2], 3)
        tau = Colouring.of([0, 1, 1, 2], 3)
        overlap = colouring_service.overlap(sigma, tau)
        assert overlap.counts == [[1, 1, 0], [0, 1, 0], [0, 0, 1]]
        assert overlap.row_counts == [2, 1, 1]
        assert overlap.col_counts == [1, 2, 1]

    def test_overlap_needs_matching_colourings(self):
        with pytest.raises(ValidationError):
            colouring_service.overlap(Colouring.of([0, 1], 3), Colouring.of([0, 1, 2], 3))

    def test_is_balanced(self):
        sigma = colouring_service.balanced_map(300, 3, seed=0)
        assert colouring_service.is_balanced(sigma, 1.0)
        skewed = Colouring.of([0] * 200 + [1] * 50 + [2] * 50, 3)
        assert not colouring_service.is_balanced(skewed, 1.0)

    def test_line_format(self):
        sigma = Colouring.from_line("0 2 1 1", 3)
        assert sigma.to_line() == "0 2 1 1"


class TestExactCounts:
    def test_single_edge(self, single_edge):
        assert colouring_service.count_colourings_exact(single_edge, 3) == 24
        assert colouring_service.count_colourings_table(single_edge, 3) == 24

    def test_no_edges(self):
        h = Hypergraph.from_edges(4, 3, [])
        assert colouring_service.count_colourings_exact(h, 3) == 81

    def test_two_edges_sharing_two_vertices(self):
        h = Hypergraph.from_edges(4, 3, [[0, 1, 2], [0, 1, 3]])
        assert colouring_service.count_colourings_exact(h, 3) == 66

    def test_uncolourable(self, complete_7):
        assert colouring_service.count_colourings_exact(complete_7, 3) == 0
        with pytest.raises(UncolourableError):
            colouring_service.sample_uniform_colouring(complete_7, 3, seed=0)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_backtracking_matches_table(self, seed):
        params = ModelParams.with_edges(q=3, k=3, n=9, m=12)
        h = hypergraph_service.gen_multi(params, seed)
        assert colouring_service.count_colourings_exact(h, 3) == colouring_service.count_colourings_table(h, 3)

    def test_oracle_guard(self):
        h = Hypergraph.from_edges(settings.max_oracle_vertices + 1, 3, [[0, 1, 2]])
        with pytest.raises(ResourceGuardError):
            colouring_service.count_colourings_exact(h, 3)

    def test_enumerate_proper(self, single_edge):
        proper = colouring_service.enumerate_proper(single_edge, 3)
        assert proper.shape == (24, 3)
        assert all(len(set(row)) > 1 for row in proper.tolist())

    def test_table_caches_are_bounded(self):
        for n in range(3, TABLE_CACHE_SIZE + 5):
            colouring_service.count_colourings_table(Hypergraph.from_edges(n, 3, []), 3)
        assert colouring_service.table.cache_info().currsize <= TABLE_CACHE_SIZE

        table = colouring_service.table(7, 3)
        for edge in itertools.combinations(range(7), 3):
            table.mono_bits(edge)
        info = table.mono_bits.cache_info()
        assert info.maxsize == MONO_BITS_CACHE_SIZE
        assert info.currsize == 35


class TestExpectation:
    def test_single_edge_expectation(self):
        assert colouring_service.expected_colourings_exact(3, 3, 3, 1) == Fraction(24)

    def test_no_edges_expectation(self):
        assert colouring_service.expected_colourings_exact(5, 3, 3, 0) == Fraction(243)

    @pytest.mark.parametrize("n", range(8, 15))
    def test_first_moment_brackets_exact_expectation(self, n):
        params = ModelParams(q=3, k=3, c=1.0, n=n)
        exact = colouring_service.expected_colourings_exact(n, 3, 3, params.m)
        gap = math.log(exact) - moment_service.first_moment_log(params, n)
        assert -1e-9 <= gap <= n * math.log(9 / 8) + 1e-9


class TestSamplers:
    def test_uniform_colouring_is_proper(self):
        params = ModelParams.with_edges(q=3, k=3, n=10, m=12)
        h = hypergraph_service.gen_multi(params, seed=5)
        sigma = colouring_service.sample_uniform_colouring(h, 3, seed=9)
        assert colouring_service.is_proper(h, sigma)

    def test_uniform_colouring_is_uniform(self, single_edge):
        p_value = experiment_service.uniform_colouring_uniformity(single_edge, 3, 2400, seed=0)
        assert p_value > 1e-3

    def test_rank_descent_without_table(self, monkeypatch):
        monkeypatch.setattr(settings, "max_enumeration_states", 10)
        h = Hypergraph.from_edges(5, 3, [[0, 1, 2], [2, 3, 4]])
        a = colouring_service.sample_uniform_colouring(h, 3, seed=4)
        b = colouring_service.sample_uniform_colouring(h, 3, seed=4)
        assert colouring_service.is_proper(h, a)
        assert a.to_line() == b.to_line()

    def test_planted_map_respects_budget(self):
        sigma = colouring_service.sample_planted_map(30, 3, 3, 60, seed=1)
        assert colouring_service.mono_count(sigma, 3) <= math.comb(30, 3) - 60

    def test_planted_map_without_admissible_map(self):
        with pytest.raises(GenerationError):
            colouring_service.sample_planted_map(4, 3, 3, 5, seed=0)

    def test_planted_map_is_uniform(self):
        assert experiment_service.planted_map_uniformity(3, 2, 3, 1, 3000, seed=0) > 1e-3

    def test_random_colouring_pair(self):
        params = ModelParams(q=3, k=3, c=1.0, n=8)
        h, sigma = colouring_service.sample_random_colouring_pair(params, seed=3)
        assert not h.multi_edges_allowed
        assert colouring_service.is_proper(h, sigma)
        assert np.unique(h.edges, axis=0).shape[0] == 8
