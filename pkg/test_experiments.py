"""Tests for experiment configs, the trial runner, result files and small sweeps."""

import json

import numpy as np
import pytest

from core.result_store import ResultStore, result_store
from core.trial_runner import TrialRunner
from exceptions import ResourceGuardError, StatisticsError, ValidationError
from models.experiment import ExperimentConfig, ExperimentKind, TrialRecord
from models.schemas import ModelParams, build_model
from services.experiment_service import (
    _core_trial,
    derive_seeds,
    experiment_service,
    random_direction,
)


def config(**data):
    return build_model(ExperimentConfig, **data)


class TestExperimentConfig:
    def test_grid_is_sorted_and_deduplicated(self):
        cfg = config(kind="core", q=[4, 3, 3], k=[3], c=[12.0, 5.0], n=100)
        assert [(p.q, p.c) for p in cfg.param_grid()] == [(3, 5.0), (3, 12.0), (4, 5.0), (4, 12.0)]
        assert cfg.param_grid()[0].m == 500

    def test_explicit_edge_count(self):
        cfg = config(kind="oracle", n=8, m=6, c=[3.0, 4.0])
        (params,) = cfg.param_grid()
        assert params.m == 6
        assert params.c == pytest.approx(0.75)

    def test_explicit_edge_count_needs_n(self):
        with pytest.raises(ValidationError):
            config(kind="oracle", m=6)

    def test_rejects_small_q(self):
        with pytest.raises(ValidationError):
            config(kind="thresholds", q=[2])

    def test_rejects_empty_grid(self):
        with pytest.raises(ValidationError):
            config(kind="thresholds", q=[])

    def test_echo_omits_output_and_workers(self):
        echoed = config(kind="thresholds", workers=4, out="x.csv").echo()
        assert "out" not in echoed and "workers" not in echoed
        assert echoed["kind"] == "thresholds"


class TestTrialRunner:
    def test_task_seeds(self):
        grid = [ModelParams(q=3, k=3, c=1.0, n=10), ModelParams(q=3, k=3, c=2.0, n=10)]
        tasks = TrialRunner.tasks(grid, 3, seed=7)
        assert [(t[0].c, t[1], t[2]) for t in tasks][:4] == [(1.0, 0, 7), (1.0, 1, 8), (1.0, 2, 9), (2.0, 0, 7)]

    def test_records_in_canonical_order(self):
        grid = [ModelParams(q=3, k=3, c=12.0, n=200)]
        tasks = list(reversed(TrialRunner.tasks(grid, 3, seed=0)))
        records = TrialRunner(1).run(_core_trial, tasks)
        assert [r.seed for r in records] == [0, 1, 2]

    def test_parallel_matches_serial(self):
        grid = [ModelParams(q=3, k=3, c=12.0, n=200)]
        tasks = TrialRunner.tasks(grid, 4, seed=3)
        serial = [r.flat() for r in TrialRunner(1).run(_core_trial, tasks)]
        parallel = [r.flat() for r in TrialRunner(2).run(_core_trial, tasks)]
        assert serial == parallel

    def test_derived_seeds_are_stable(self):
        assert derive_seeds(5, 3) == derive_seeds(5, 3)
        assert len(set(derive_seeds(5, 3))) == 3


class TestResultStore:
    def test_csv_is_deterministic(self):
        cfg = config(kind="thresholds", q=[3, 4], k=[3, 4])
        first = result_store.to_csv(experiment_service.run(cfg))
        second = result_store.to_csv(experiment_service.run(cfg))
        assert first == second
        header = first.splitlines()[0].split(",")
        assert header[0] == "schema_version"
        assert "c_r_exact" in header

    def test_timings_only_on_request(self):
        cfg = config(kind="core", c=[12.0], n=200, trials=2)
        plain = result_store.to_frame(experiment_service.run(cfg))
        timed = result_store.to_frame(experiment_service.run(cfg.model_copy(update={"include_timings": True})))
        assert "runtime_s" not in plain.columns
        assert "runtime_s" in timed.columns

    def test_write_and_read(self, tmp_path):
        cfg = config(kind="thresholds")
        path = result_store.write(experiment_service.run(cfg), tmp_path / "out" / "t.csv")
        frame = result_store.read_csv(path)
        assert frame["schema_version"].tolist() == [1]
        assert frame["c_r_exact"].iloc[0] == pytest.approx(9.357, abs=1e-3)

    def test_json_payload(self):
        cfg = config(kind="thresholds", format="json")
        payload = json.loads(result_store.render(experiment_service.run(cfg)))
        assert payload["schema_version"] == 1
        assert payload["config"]["q"] == [3]
        assert payload["summary"][0]["q"] == 3

    def test_schema_version_override(self):
        cfg = config(kind="thresholds")
        frame = ResultStore(schema_version=7).to_frame(experiment_service.run(cfg))
        assert frame["schema_version"].tolist() == [7]


class TestSweeps:
    def test_thresholds(self):
        result = experiment_service.run(config(kind="thresholds", q=[3], k=[3]))
        (row,) = result.summary
        assert row["c_r_exact"] == pytest.approx(9.360, abs=5e-3)
        assert row["c_cond"] == pytest.approx(8.645, abs=1e-3)

    def test_core_fraction_above_and_below_threshold(self):
        result = experiment_service.run(config(kind="core", c=[5.0, 12.0], n=3000, trials=3))
        below, above = result.summary
        assert below["core_fraction_mean"] < 0.05
        assert not below["upsilon_defined"]
        assert above["core_fraction_mean"] == pytest.approx(above["upsilon"], abs=0.03)
        assert above["upsilon"] == pytest.approx(0.9717, abs=1e-3)

    def test_cycles_need_enough_trials(self):
        with pytest.raises(StatisticsError):
            experiment_service.run(config(kind="cycles", c=[0.5], n=500, trials=50))

    def test_cycles_summary(self):
        result = experiment_service.run(config(kind="cycles", c=[0.5], n=600, trials=100, L=3))
        lengths = [row["length"] for row in result.summary]
        assert lengths == [2, 3, -1]
        two = result.summary[0]
        assert two["expected"] == pytest.approx(2.25)
        assert two["dof"] >= 1
        assert abs(two["mean"] - two["expected"]) < 5 * two["se"] + 0.1

        rows = result.rows()
        assert len(rows) == 2 * 100
        assert [(r["trial"], r["length"]) for r in rows[:2]] == [(0, 2), (0, 3)]
        assert all(isinstance(r["count"], int) and "C_2" not in r for r in rows)

    def test_frozen_at_oracle_scale(self):
        result = experiment_service.run(config(kind="frozen", n=10, m=8, trials=3))
        (row,) = result.summary
        assert row["contradictions"] == 0
        assert row["monotone_violations"] == 0

    def test_oracle(self):
        result = experiment_service.run(config(kind="oracle", n=6, c=[1.0], trials=200))
        (row,) = result.summary
        assert abs(row["mean"] - row["expected_exact"]) < 4 * row["se"]
        assert row["first_moment"] <= row["expected_exact"]
        assert result.report["single_edge_Z3"] == 24
        assert result.report["planted_map_uniformity_p"] > 1e-3
        assert result.report["uniform_colouring_uniformity_p"] > 1e-3

    def test_oracle_guard(self):
        with pytest.raises(ResourceGuardError):
            experiment_service.run(config(kind="oracle", n=40, trials=1))

    def test_work_guard(self):
        with pytest.raises(ResourceGuardError):
            experiment_service.run(config(kind="core", n=10**7, trials=10))

    def test_needs_n(self):
        with pytest.raises(ValidationError):
            experiment_service.run(config(kind="core"))

    def test_moments(self):
        result = experiment_service.run(config(kind="moments", c=[1.0], samples=40, directions=5))
        (row,) = result.summary
        assert row["hessian_max_rel_error"] < 1e-4
        assert row["quadratic_max_rel_error"] < 1e-2
        assert row["second_moment_ratio"] == pytest.approx(1.009423, abs=1e-5)
        assert row["landscape_max_gap"] <= 1e-9
        assert "q=3,k=3,c=1.0" in result.report["landscapes"]

    def test_moments_beyond_divergence(self):
        result = experiment_service.run(config(kind="moments", c=[11.0], samples=10, directions=2))
        assert result.summary[0]["second_moment_ratio"] is None

    def test_random_direction(self):
        d = random_direction(np.random.default_rng(0), 4)
        assert np.allclose(d.sum(axis=0), 0) and np.allclose(d.sum(axis=1), 0)
        assert np.linalg.norm(d) == pytest.approx(1.0)


class TestTrialRecord:
    def test_flat_row(self):
        params = ModelParams(q=3, k=3, c=1.0, n=10)
        record = TrialRecord.for_params(ExperimentKind.ORACLE, params, 0, 4, Z=12)
        record.runtime_s = 0.5
        assert record.flat() == {
            "kind": "oracle", "q": 3, "k": 3, "c": 1.0, "n": 10, "m": 10,
            "trial": 0, "seed": 4, "Z": 12,
        }
        assert record.flat(include_timings=True)["runtime_s"] == 0.5
