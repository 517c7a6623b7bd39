"""Experiment harness: parameter sweeps, seeded trials and aggregation."""

import itertools
import math
from functools import partial
from math import comb
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from config.settings import settings
from core.trial_runner import TrialRunner, TrialTask
from exceptions import (
    DivergenceError,
    ResourceGuardError,
    StatisticsError,
    ValidationError,
)
from models.experiment import ExperimentConfig, ExperimentKind, ExperimentResult, TrialRecord
from models.schemas import Colouring, Hypergraph, ModelParams
from services.colouring_service import colouring_service
from services.core_service import core_service
from services.cycle_service import MIN_FIT_SAMPLES, cycle_service
from services.hypergraph_service import hypergraph_service
from services.moment_service import moment_service
from services.threshold_service import threshold_service
from utils.logger import get_logger

logger = get_logger(__name__)


def derive_seeds(seed: int, count: int) -> List[int]:
    """Independent sub-seeds for the generators used inside one trial."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def planted_instance(params: ModelParams, seed: int) -> Tuple[Hypergraph, Colouring]:
    """Planted map then planted hypergraph, each from its own sub-seed."""
    map_seed, graph_seed = derive_seeds(seed, 2)
    n = params.require_n()
    sigma = colouring_service.sample_planted_map(n, params.q, params.k, params.m, map_seed)
    return hypergraph_service.gen_planted(params, sigma, graph_seed), sigma


def _cycle_trial(task: TrialTask, L: int, planted: bool) -> TrialRecord:
    params, trial, seed = task
    if planted:
        map_seed, graph_seed = derive_seeds(seed, 2)
        sigma = colouring_service.balanced_map(params.require_n(), params.q, map_seed)
        h = hypergraph_service.gen_planted(params, sigma, graph_seed)
    else:
        h = hypergraph_service.gen_multi(params, seed)
    census = cycle_service.count_loose_cycles(h, L)
    values = {f"C_{length}": census.count(length) for length in range(2, L + 1)}
    return TrialRecord.for_params(ExperimentKind.CYCLES, params, trial, seed, **values)


def _core_trial(task: TrialTask) -> TrialRecord:
    params, trial, seed = task
    h, sigma = planted_instance(params, seed)
    trace = core_service.extract_core(h, sigma)
    counts = core_service.essential_edge_counts(h, sigma)
    mask = np.ones_like(counts, dtype=bool)
    mask[np.arange(h.n), sigma.assignment] = False
    off_colour = counts[mask]
    return TrialRecord.for_params(
        ExperimentKind.CORE,
        params,
        trial,
        seed,
        core_fraction=trace.core_fraction,
        core_size=trace.core_size,
        rounds=len(trace.rounds),
        essential_mean=float(off_colour.mean()) if off_colour.size else 0.0,
    )


def _frozen_trial(
    task: TrialTask, depth_budget: int, frozen_sample: Optional[int]
) -> TrialRecord:
    params, trial, seed = task
    h, sigma = planted_instance(params, seed)
    trace = core_service.extract_core(h, sigma)
    stripped = np.flatnonzero(trace.removal_rounds() >= 0)
    if frozen_sample is not None and stripped.size > frozen_sample:
        rng = np.random.default_rng(derive_seeds(seed, 3)[2])
        stripped = np.sort(rng.choice(stripped, size=frozen_sample, replace=False))

    certified = {
        int(v)
        for v in stripped
        if core_service.recolouring_certificate(h, sigma, int(v), depth_budget, trace) is not None
    }
    values = {
        "core_size": trace.core_size,
        "non_core_checked": int(stripped.size),
        "certified": len(certified),
        "certified_fraction": len(certified) / stripped.size if stripped.size else 1.0,
    }

    if h.n <= settings.max_oracle_vertices and params.q**h.n <= settings.max_enumeration_states:
        contradictions = monotone_violations = frozen_count = 0
        for v in range(h.n):
            frozen_1 = core_service.is_ell_frozen_exact(h, sigma, v, 1)
            frozen_2 = core_service.is_ell_frozen_exact(h, sigma, v, 2)
            frozen_all = core_service.is_ell_frozen_exact(h, sigma, v, h.n)
            frozen_count += int(frozen_1)
            if v in certified and frozen_1:
                contradictions += 1
            if (frozen_2 and not frozen_1) or (frozen_all and not frozen_2):
                monotone_violations += 1
        values.update(
            oracle_frozen=frozen_count,
            contradictions=contradictions,
            monotone_violations=monotone_violations,
        )
    return TrialRecord.for_params(ExperimentKind.FROZEN, params, trial, seed, **values)


def _oracle_trial(task: TrialTask) -> TrialRecord:
    params, trial, seed = task
    h = hypergraph_service.gen_multi(params, seed)
    if params.q**h.n <= settings.max_enumeration_states:
        z = colouring_service.count_colourings_table(h, params.q)
    else:
        z = colouring_service.count_colourings_exact(h, params.q)
    return TrialRecord.for_params(ExperimentKind.ORACLE, params, trial, seed, Z=z)


def _mean_se(values: pd.Series) -> Tuple[float, float]:
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    return mean, se


def random_direction(rng: np.random.Generator, q: int) -> np.ndarray:
    """Unit-norm q x q matrix with zero row and column sums."""
    a = rng.standard_normal((q, q))
    d = a - a.mean(axis=1, keepdims=True) - a.mean(axis=0, keepdims=True) + a.mean()
    return d / np.linalg.norm(d)


class ExperimentService:
    """Service running one experiment kind over a configured sweep."""

    def run(self, config: ExperimentConfig) -> ExperimentResult:
        handlers = {
            ExperimentKind.THRESHOLDS: self.run_thresholds,
            ExperimentKind.CYCLES: self.run_cycles,
            ExperimentKind.CORE: self.run_core,
            ExperimentKind.FROZEN: self.run_frozen,
            ExperimentKind.MOMENTS: self.run_moments,
            ExperimentKind.ORACLE: self.run_oracle,
        }
        logger.info(f"Starting {config.kind.value} experiment")
        return handlers[config.kind](config)

    def _runner(self, config: ExperimentConfig) -> TrialRunner:
        return TrialRunner(config.workers)

    def _require_n(self, config: ExperimentConfig) -> int:
        if config.n is None:
            raise ValidationError(f"the {config.kind.value} experiment needs n")
        hypergraph_service.check_work(config.n, config.trials * len(config.param_grid()))
        return config.n

    def run_thresholds(self, config: ExperimentConfig) -> ExperimentResult:
        """One row per (q, k): lambda_r, alpha_r, c_r, c_cond and the first-regime bound."""
        rows = [
            report.model_dump()
            for report in threshold_service.threshold_table(config.q, config.k)
        ]
        return ExperimentResult(config=config, summary=rows)

    def run_cycles(self, config: ExperimentConfig) -> ExperimentResult:
        """
        Loose-cycle censuses over gen_multi draws (or planted draws with a
        balanced map), fitted against Poisson(lambda_l) or Poisson(mu_l).

        Raises:
            StatisticsError: fewer than the trials a goodness-of-fit test needs
        """
        self._require_n(config)
        if config.trials < MIN_FIT_SAMPLES:
            raise StatisticsError(
                f"cycle fits need at least {MIN_FIT_SAMPLES} trials, got {config.trials}"
            )
        grid = config.param_grid()
        fn = partial(_cycle_trial, L=config.L, planted=config.planted)
        records = self._runner(config).run(fn, TrialRunner.tasks(grid, config.trials, config.seed))
        frame = pd.DataFrame([r.flat() for r in records])

        summary = []
        for params in grid:
            rows = frame[(frame.q == params.q) & (frame.k == params.k) & (frame.c == params.c)]
            poisson = cycle_service.poisson_params(params, config.L)
            for p in poisson:
                column = rows[f"C_{p.length}"]
                mean, se = _mean_se(column)
                target = p.mu_ell if config.planted else p.lambda_ell
                try:
                    fit = cycle_service.poisson_fit(column.tolist(), target)
                    p_value, chi2, dof = fit.p_value, fit.chi2, fit.dof
                except StatisticsError as e:
                    logger.warning(f"no fit for C_{p.length} at {params.key()}: {e.message}")
                    p_value, chi2, dof = None, None, None
                summary.append(
                    {
                        **params.key(),
                        "length": p.length,
                        "expected": target,
                        "mean": mean,
                        "se": se,
                        "chi2": chi2,
                        "dof": dof,
                        "p_value": p_value,
                    }
                )
            if config.L >= 3 and len(rows) > 2:
                corr = rows["C_2"].corr(rows["C_3"])
                summary.append(
                    {**params.key(), "length": -1, "statistic": "corr(C_2,C_3)",
                     "mean": None if math.isnan(corr) else float(corr)}
                )
        return ExperimentResult(config=config, records=records, summary=summary)

    def run_core(self, config: ExperimentConfig) -> ExperimentResult:
        """Planted instances, core extraction, and the mean core fraction against Upsilon."""
        self._require_n(config)
        grid = config.param_grid()
        records = self._runner(config).run(
            _core_trial, TrialRunner.tasks(grid, config.trials, config.seed)
        )
        frame = pd.DataFrame([r.flat() for r in records])
        summary = []
        for params in grid:
            rows = frame[(frame.q == params.q) & (frame.k == params.k) & (frame.c == params.c)]
            mean, se = _mean_se(rows["core_fraction"])
            upsilon = threshold_service.upsilon(params)
            summary.append(
                {
                    **params.key(),
                    "core_fraction_mean": mean,
                    "core_fraction_se": se,
                    "upsilon": upsilon.value,
                    "upsilon_defined": upsilon.defined,
                    "alpha": threshold_service.alpha(params),
                    "essential_mean": float(rows["essential_mean"].mean()),
                    "rounds_mean": float(rows["rounds"].mean()),
                }
            )
        return ExperimentResult(config=config, records=records, summary=summary)

    def run_frozen(self, config: ExperimentConfig) -> ExperimentResult:
        """
        Recolouring certificates for non-core vertices; at oracle scale every
        vertex is also checked by exhaustive search.
        """
        self._require_n(config)
        grid = config.param_grid()
        fn = partial(
            _frozen_trial, depth_budget=config.depth_budget, frozen_sample=config.frozen_sample
        )
        records = self._runner(config).run(fn, TrialRunner.tasks(grid, config.trials, config.seed))
        frame = pd.DataFrame([r.flat() for r in records])
        summary = []
        for params in grid:
            rows = frame[(frame.q == params.q) & (frame.k == params.k) & (frame.c == params.c)]
            checked = int(rows["non_core_checked"].sum())
            row = {
                **params.key(),
                "non_core_checked": checked,
                "certified_fraction": float(rows["certified"].sum() / checked) if checked else 1.0,
            }
            if "contradictions" in rows:
                row["contradictions"] = int(rows["contradictions"].sum())
                row["monotone_violations"] = int(rows["monotone_violations"].sum())
            summary.append(row)
            if row["certified_fraction"] < 0.95:
                logger.info(
                    f"certified fraction {row['certified_fraction']:.3f} below 0.95 at {params.key()}"
                )
        return ExperimentResult(config=config, records=records, summary=summary)

    def run_oracle(self, config: ExperimentConfig) -> ExperimentResult:
        """
        Exact colouring counts on with-replacement draws against the exact
        expectation, plus sampler uniformity checks on enumerable instances.
        """
        n = self._require_n(config)
        if n > settings.max_oracle_vertices:
            raise ResourceGuardError(
                f"n={n} exceeds max_oracle_vertices={settings.max_oracle_vertices}", {"n": n}
            )
        grid = config.param_grid()
        records = self._runner(config).run(
            _oracle_trial, TrialRunner.tasks(grid, config.trials, config.seed)
        )
        frame = pd.DataFrame([r.flat() for r in records])
        summary = []
        for params in grid:
            rows = frame[(frame.q == params.q) & (frame.k == params.k) & (frame.c == params.c)]
            mean, se = _mean_se(rows["Z"].astype(float))
            exact = colouring_service.expected_colourings_exact(n, params.q, params.k, params.m)
            summary.append(
                {
                    **params.key(),
                    "expected_exact": float(exact),
                    "mean": mean,
                    "se": se,
                    "z_score": (mean - float(exact)) / se if se > 0 else None,
                    "first_moment": math.exp(moment_service.first_moment_log(params, n)),
                }
            )
        single_edge = Hypergraph.from_edges(3, 3, [[0, 1, 2]])
        report = {
            "single_edge_Z3": colouring_service.count_colourings_exact(single_edge, 3),
            "planted_map_uniformity_p": self.planted_map_uniformity(3, 2, 3, 1, 3000, config.seed),
            "uniform_colouring_uniformity_p": self.uniform_colouring_uniformity(
                single_edge, 3, 3000, config.seed
            ),
        }
        return ExperimentResult(config=config, records=records, summary=summary, report=report)

    def planted_map_uniformity(
        self, n: int, q: int, k: int, m: int, draws: int, seed: int
    ) -> float:
        """Chi-square p-value of sample_planted_map draws against the uniform law on admissible maps."""
        budget = comb(n, k) - m
        admissible = [
            code
            for code in itertools.product(range(q), repeat=n)
            if sum(comb(code.count(col), k) for col in range(q)) <= budget
        ]
        index = {code: i for i, code in enumerate(admissible)}
        counts = np.zeros(len(admissible))
        for i in range(draws):
            sigma = colouring_service.sample_planted_map(n, q, k, m, seed + i)
            counts[index[tuple(int(x) for x in sigma.assignment)]] += 1
        return float(stats.chisquare(counts).pvalue)

    def uniform_colouring_uniformity(self, h: Hypergraph, q: int, draws: int, seed: int) -> float:
        """Chi-square p-value of sample_uniform_colouring draws over all proper colourings."""
        proper = colouring_service.enumerate_proper(h, q)
        index = {tuple(int(x) for x in row): i for i, row in enumerate(proper)}
        counts = np.zeros(len(index))
        for i in range(draws):
            sigma = colouring_service.sample_uniform_colouring(h, q, seed + i)
            counts[index[tuple(int(x) for x in sigma.assignment)]] += 1
        return float(stats.chisquare(counts).pvalue)

    def run_moments(self, config: ExperimentConfig) -> ExperimentResult:
        """
        Per parameter set: moment constants, quadratic-expansion and Hessian checks
        along random directions, the second-moment identity, and a landscape scan.
        """
        rng = np.random.default_rng(config.seed)
        step = 1e-3
        summary = []
        landscapes: Dict[str, Dict] = {}
        for params in config.param_grid():
            funcs = moment_service.moment_functions(params)
            q = params.q
            worst_taylor = worst_hessian = 0.0
            for _ in range(config.directions):
                d = random_direction(rng, q)
                exact, predicted = moment_service.quadratic_expansion_check(params, d, step)
                if predicted != 0:
                    worst_taylor = max(worst_taylor, abs(exact - predicted) / abs(predicted))
                hessian = self.hessian_action(params, d, step)
                target = -(q**2) * funcs.psi
                if target != 0:
                    worst_hessian = max(worst_hessian, abs(hessian - target) / abs(target))
            try:
                ratio: Optional[float] = moment_service.second_moment_ratio(params)
            except DivergenceError:
                ratio = None
            scan = moment_service.landscape_scan(params, samples=config.samples, seed=config.seed)
            landscapes[f"q={q},k={params.k},c={params.c}"] = scan.model_dump(mode="json")
            summary.append(
                {
                    **params.key(),
                    "f_bar": funcs.f_bar,
                    "psi": funcs.psi,
                    "gamma": funcs.gamma,
                    "kappa": funcs.kappa,
                    "quadratic_max_rel_error": worst_taylor,
                    "hessian_max_rel_error": worst_hessian,
                    "second_moment_ratio": ratio,
                    "landscape_max_gap": scan.max_gap,
                    "bound_violations": scan.bound_violations if scan.bound_checked else None,
                }
            )
        return ExperimentResult(config=config, summary=summary, report={"landscapes": landscapes})

    def hessian_action(self, params: ModelParams, direction: np.ndarray, t: float) -> float:
        """Central second difference of f at rho_bar along `direction`, per unit ||direction||^2."""
        base = moment_service.rho_bar(params.q)
        norm = float(np.sum(direction * direction))
        plus = moment_service.f(base + t * direction, params)
        minus = moment_service.f(base - t * direction, params)
        return (plus + minus - 2 * moment_service.f_bar(params)) / (t * t * norm)


experiment_service = ExperimentService()
