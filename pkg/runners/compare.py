"""
Golden-file comparison of simulation reports
"""

import json
import logging
from typing import Dict, List, Mapping

from pydantic import BaseModel, Field

from models.errors import ConfigError


logger = logging.getLogger(__name__)


class Tolerance(BaseModel):
    abs: float = Field(default=0.0, ge=0)
    rel: float = Field(default=0.0, ge=0)


class Verdict(BaseModel):
    metric: str
    expected: float
    actual: float | None = None
    passed: bool
    note: str = ""


def load_json(path: str) -> Dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def compare(report: Mapping[str, float], golden: Mapping[str, float],
            tolerances: Mapping[str, Tolerance]) -> List[Verdict]:
    """
    One verdict per golden metric. A metric passes when it is within the
    absolute or the relative tolerance; a metric missing from the report fails.
    """
    verdicts = []
    for metric, expected in golden.items():
        tolerance = tolerances.get(metric, Tolerance())
        if metric not in report:
            verdicts.append(Verdict(metric=metric, expected=expected, passed=False, note="missing"))
            continue
        actual = float(report[metric])
        error = abs(actual - expected)
        passed = error <= tolerance.abs or error <= tolerance.rel * abs(expected)
        verdicts.append(Verdict(metric=metric, expected=expected, actual=actual, passed=passed,
                                note="" if passed else f"off by {error:.6g}"))
    return verdicts


def compare_files(report_path: str, golden_path: str) -> List[Verdict]:
    """Compare ``report.json`` against a golden file ``{"metrics": {...}, "tolerances": {...}}``"""
    report = load_json(report_path)
    golden = load_json(golden_path)
    if "metrics" not in golden:
        raise ConfigError(f"{golden_path}: golden file needs a 'metrics' object")
    metrics = report.get("metrics", report)
    tolerances = {name: Tolerance(**value) for name, value in golden.get("tolerances", {}).items()}
    verdicts = compare(metrics, golden["metrics"], tolerances)
    failed = [v.metric for v in verdicts if not v.passed]
    logger.info("%d metrics compared, %d failed%s", len(verdicts), len(failed),
                f": {', '.join(failed)}" if failed else "")
    return verdicts


def format_table(verdicts: List[Verdict]) -> str:
    lines = [f"{'metric':<20} {'expected':>14} {'actual':>14}  verdict"]
    for v in verdicts:
        actual = "-" if v.actual is None else f"{v.actual:.6g}"
        lines.append(f"{v.metric:<20} {v.expected:>14.6g} {actual:>14}  "
                     f"{'PASS' if v.passed else 'FAIL'} {v.note}".rstrip())
    return "\n".join(lines)
