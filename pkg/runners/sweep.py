"""
Parallel sweeps: one independent simulator per configuration
"""

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Dict, List, Optional, Tuple

from config import Config
from models.kernel import RunConfig, SweepConfig
from models.report import RooflinePoint, SimReport
from services.simulator import simulate


def _run_one(run: RunConfig) -> Tuple[SimReport, RooflinePoint]:
    result = simulate(run)
    return result.report, result.point


class SweepRunner:
    """
    Run every configuration of a sweep in a process pool and collect the
    reports in configuration order
    """

    def __init__(self, max_workers: Optional[int] = None):
        self.config = Config()
        self.max_workers = max_workers or self.config.MAX_WORKERS
        self.logger = logging.getLogger(__name__)

    def run(self, sweep: SweepConfig) -> List[Tuple[SimReport, RooflinePoint]]:
        runs = sweep.expand()
        self.logger.info("Sweep of %d configurations on %d workers", len(runs), self.max_workers)
        if self.max_workers == 1:
            return [_run_one(run) for run in runs]

        results: Dict[int, Tuple[SimReport, RooflinePoint]] = {}
        with ProcessPoolExecutor(max_workers=self.max_workers) as executor:
            future_to_index = {executor.submit(_run_one, run): index for index, run in enumerate(runs)}
            for future in as_completed(future_to_index):
                index = future_to_index[future]
                run = runs[index]
                results[index] = future.result()
                self.logger.info("Finished %s on %d lanes (%d/%d)", run.kernel.label, run.lanes,
                            len(results), len(runs))
        return [results[index] for index in range(len(runs))]
