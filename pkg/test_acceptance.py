"""Desk-scale Monte Carlo checks; each takes minutes. Run with `pytest -m slow`."""

import pytest

from models.experiment import ExperimentConfig
from models.schemas import ModelParams
from services.experiment_service import experiment_service
from services.moment_service import moment_service

pytestmark = pytest.mark.slow


def run(**data):
    return experiment_service.run(ExperimentConfig(**data))


def test_core_fraction_matches_upsilon():
    result = run(kind="core", c=[5.0, 12.0], n=100_000, trials=20, workers=4)
    below, above = result.summary
    assert below["core_fraction_mean"] < 0.01
    assert above["core_fraction_mean"] == pytest.approx(above["upsilon"], abs=0.01)


def test_loose_cycle_counts_are_poisson():
    result = run(kind="cycles", c=[0.5], n=10_000, trials=500, L=3, workers=4)
    for row in result.summary[:2]:
        assert abs(row["mean"] - row["expected"]) < 4 * row["se"] + 0.05
        assert row["p_value"] > 1e-3


def test_planted_cycle_counts_follow_mu():
    result = run(kind="cycles", c=[0.5], n=10_000, trials=500, L=3, planted=True, workers=4)
    two = result.summary[0]
    assert abs(two["mean"] - two["expected"]) < 4 * two["se"] + 0.05


def test_certificates_agree_with_exhaustive_search():
    result = run(kind="frozen", n=12, m=8, trials=50)
    (row,) = result.summary
    assert row["contradictions"] == 0
    assert row["monotone_violations"] == 0


def test_uniform_overlap_dominates_the_landscape():
    report = moment_service.landscape_scan(ModelParams(q=3, k=3, c=8.0), samples=10_000, seed=0)
    assert report.max_gap <= 1e-9


def test_exact_counts_average_to_the_expectation():
    result = run(kind="oracle", n=12, c=[1.0], trials=1000)
    (row,) = result.summary
    assert abs(row["z_score"]) < 4
