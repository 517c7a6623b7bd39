"""Bounded worker pool for independent, seeded trials."""

import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence, Tuple

from models.experiment import TrialRecord
from models.schemas import ModelParams
from utils.logger import get_logger

logger = get_logger(__name__)

# (params, trial index, seed)
TrialTask = Tuple[ModelParams, int, int]


def _timed(fn: Callable[[TrialTask], TrialRecord], task: TrialTask) -> TrialRecord:
    start = time.perf_counter()
    record = fn(task)
    record.runtime_s = time.perf_counter() - start
    return record


class TrialRunner:
    """Runs a trial function over tasks and returns records in canonical order."""

    def __init__(self, workers: int = 1):
        self.workers = max(1, workers)

    @staticmethod
    def tasks(grid: Sequence[ModelParams], trials: int, seed: int) -> List[TrialTask]:
        """Every grid point gets trials 0..trials-1 with seeds seed + index."""
        return [(params, i, seed + i) for params in grid for i in range(trials)]

    def run(
        self, fn: Callable[[TrialTask], TrialRecord], tasks: Sequence[TrialTask]
    ) -> List[TrialRecord]:
        """
        Execute `fn` on every task. `fn` must be a module-level function when
        more than one worker is used.
        """
        logger.info(f"running {len(tasks)} trials on {self.workers} worker(s)")
        if self.workers == 1 or len(tasks) <= 1:
            records = [_timed(fn, task) for task in tasks]
        else:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                records = list(pool.map(_timed, [fn] * len(tasks), tasks))
        records.sort(key=TrialRecord.sort_key)
        return records
