"""
Roofline and issue-rate performance model, plus the measurement helpers that
turn simulation counters into utilization and loss figures
"""

import logging
import os
from typing import Dict, Iterable, List, Mapping

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from config import Config
from models.errors import ConfigError, InvariantViolation
from models.kernel import KernelSpec
from models.report import RooflinePoint, SimReport, UtilSample


logger = logging.getLogger(__name__)

ROOFLINE_COLUMNS = ["lanes", "kernel", "n", "intensity", "bound", "measured", "loss_pct"]
UTIL_COLUMNS = ["window_start", "unit", "utilization"]


class RooflineModel(BaseModel):
    """Peak compute, memory bandwidth and issue gap of one machine size"""

    model_config = ConfigDict(frozen=True)

    lanes: int = Field(ge=1)
    delta: float = Field(default=Config.ISSUE_GAP, gt=0)

    @property
    def peak(self) -> float:
        """dpflop/cycle: one FMA per lane per cycle"""
        return 2.0 * self.lanes

    @property
    def bandwidth(self) -> float:
        """B/cycle of the memory port"""
        return Config.BITS_PER_LANE_PER_CYCLE * self.lanes / 8

    @property
    def ridge(self) -> float:
        return self.peak / self.bandwidth

    def issue_line(self, i: float) -> float:
        """Performance when one vector FMA leaves the scalar core every ``delta`` cycles"""
        return 32.0 / self.delta * i


def intensity(spec: KernelSpec) -> float:
    """Arithmetic intensity in dpflop per byte of memory traffic"""
    if spec.kind == "matmul":
        return spec.n / 16
    if spec.kind == "daxpy":
        return 2.0 / (3 * spec.sew // 8)
    padded = spec.hw + spec.k - 1
    flops = 2 * spec.c_out * spec.c_in * spec.k * spec.k * spec.hw * spec.hw
    traffic = 8 * (spec.c_in * padded * padded + spec.c_out * spec.hw * spec.hw)
    return flops / traffic


def bound(model: RooflineModel, i: float, kernel: str = "matmul") -> float:
    """min(peak, bandwidth x I), and the issue line as well for MATMUL"""
    if i <= 0:
        raise ConfigError(f"arithmetic intensity must be positive, got {i}")
    limit = min(model.peak, model.bandwidth * i)
    if kernel == "matmul":
        limit = min(limit, model.issue_line(i))
    return limit


def loss_report(report: SimReport, model: RooflineModel, spec: KernelSpec) -> RooflinePoint:
    """Measured performance against the bound; a measurement above the bound is an invariant violation"""
    i = intensity(spec)
    limit = bound(model, i, spec.kind)
    if report.performance > limit * (1 + 1e-9):
        raise InvariantViolation(
            f"{spec.label} on {report.lanes} lanes: {report.performance:.4f} dpflop/cycle "
            f"exceeds the bound {limit:.4f}")
    loss = 100.0 * (1.0 - report.performance / limit) if report.flops else 0.0
    n = spec.n if spec.kind != "dconv" else None
    return RooflinePoint(lanes=report.lanes, kernel=spec.kind, n=n, intensity=i,
                         bound=limit, measured=report.performance, loss_pct=loss)


def windowed_utilization(series: Mapping[str, np.ndarray], capacity: Mapping[str, float],
                         window: int = Config.UTIL_WINDOW) -> List[UtilSample]:
    """
    Average each per-cycle series over consecutive windows, normalized by the
    unit's per-cycle capacity. Cycle 1 is index 0; the last window may be short.
    """
    samples: List[UtilSample] = []
    for unit, values in series.items():
        values = np.asarray(values, dtype=np.float64)
        for start in range(0, len(values), window):
            chunk = values[start:start + window]
            samples.append(UtilSample(window_start=start + 1, unit=unit,
                                      utilization=float(chunk.sum() / (len(chunk) * capacity[unit]))))
    return samples


def write_roofline_csv(points: Iterable[RooflinePoint], path: str) -> None:
    frame = pd.DataFrame([p.model_dump() for p in points], columns=ROOFLINE_COLUMNS)
    frame = frame.sort_values(["kernel", "lanes", "n"], kind="stable")
    _ensure_dir(path)
    frame.to_csv(path, index=False, encoding="utf-8")
    logger.info("Wrote %d roofline rows to %s", len(frame), path)


def write_util_csv(samples: Iterable[UtilSample], path: str) -> None:
    frame = pd.DataFrame([s.model_dump() for s in samples], columns=UTIL_COLUMNS)
    _ensure_dir(path)
    frame.to_csv(path, index=False, encoding="utf-8")
    logger.info("Wrote %d utilization samples to %s", len(frame), path)


def utilization_table(points: Iterable[RooflinePoint]) -> pd.DataFrame:
    """FPU-busy percentage per (n, lanes), one column per lane count"""
    rows: List[Dict[str, float]] = [
        {"n": p.n, "lanes": p.lanes, "util_pct": 100.0 * p.measured / (2.0 * p.lanes)} for p in points]
    frame = pd.DataFrame(rows, columns=["n", "lanes", "util_pct"])
    return frame.pivot_table(index="n", columns="lanes", values="util_pct")


def _ensure_dir(path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
