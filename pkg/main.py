"""
Vector lane simulator
Main application entry point
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from config import Config
from models.errors import ConfigError, FunctionalMismatch, SimulationError
from models.kernel import KernelSpec, RunConfig, SweepConfig
from runners.compare import compare_files, format_table
from runners.sweep import SweepRunner
from services.perf_model import write_roofline_csv, write_util_csv
from services.simulator import simulate


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MISMATCH = 2
EXIT_INTERNAL = 3

RUN_KEYS = ("lanes", "mem_latency", "fpu_depth", "opq_depth", "out", "trace", "util_window")
KERNEL_KEYS = ("n", "tile", "sew", "seed", "alpha", "cout", "cout_tile", "hw")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vector-lane-sim", description="Cycle-approximate vector coprocessor simulator")
    parser.add_argument("--config", help="key = value file; command-line flags take precedence")
    parser.add_argument("--verbose", action="store_true", help="log per-instruction events")
    sub = parser.add_subparsers(dest="command", required=True)

    def machine_flags(p: argparse.ArgumentParser, lanes_help: str) -> None:
        p.add_argument("--lanes", help=lanes_help)
        p.add_argument("--kernel", choices=["matmul", "daxpy", "dconv"])
        p.add_argument("--n")
        p.add_argument("--tile", type=int)
        p.add_argument("--sew", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--cout", type=int, help="output channels of dconv")
        p.add_argument("--cout-tile", type=int)
        p.add_argument("--hw", type=int, help="image height and width of dconv")
        p.add_argument("--mem-latency", type=int)
        p.add_argument("--fpu-depth", type=int)
        p.add_argument("--opq-depth", type=int)
        p.add_argument("--util-window", type=int)
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--trace", action="store_true", default=None)

    machine_flags(sub.add_parser("run", help="simulate one kernel"), "lane count")
    sweep = sub.add_parser("sweep", help="simulate the product of lane counts and sizes")
    machine_flags(sweep, "comma-separated lane counts")
    sweep.add_argument("--workers", type=int)
    compare = sub.add_parser("compare", help="check a report against a golden file")
    compare.add_argument("report")
    compare.add_argument("golden")
    return parser


def merge_settings(args: argparse.Namespace) -> Dict[str, Any]:
    """Defaults, then the config file, then explicit flags"""
    settings: Dict[str, Any] = {"kernel": "matmul"}
    if args.config:
        try:
            settings.update(Config.load_file(args.config))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"config file: {exc}") from exc
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "verbose", "command"):
            settings[key] = value
    return settings


def _split(value: Any) -> List[int]:
    if isinstance(value, int):
        return [value]
    try:
        return [int(part) for part in str(value).split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {value!r}") from None


def run_config(settings: Dict[str, Any], lanes: Optional[int] = None, n: Optional[int] = None) -> RunConfig:
    kernel: Dict[str, Any] = {"kind": settings["kernel"]}
    for key in KERNEL_KEYS:
        if key in settings:
            kernel["c_out" if key == "cout" else key] = settings[key]
    if n is not None:
        kernel["n"] = n
    elif "n" in settings:
        kernel["n"] = _split(settings["n"])[0]
    data = {key: settings[key] for key in RUN_KEYS if key in settings}
    if lanes is not None:
        data["lanes"] = lanes
    elif "lanes" in settings:
        data["lanes"] = _split(settings["lanes"])[0]
    data["kernel"] = KernelSpec.model_validate(kernel)
    return RunConfig.model_validate(data)


class VectorSimSystem:
    """Runs, sweeps and golden comparisons behind the command line"""

    def __init__(self):
        self.config = Config()

    def run(self, run: RunConfig) -> int:
        result = simulate(run, check=False)
        os.makedirs(run.out, exist_ok=True)
        report, point = result.report, result.point
        metrics = report.metrics()
        metrics["loss_pct"] = point.loss_pct
        document = {"config": run.model_dump(), "report": report.model_dump(exclude={"util"}),
                    "roofline": point.model_dump(), "metrics": metrics,
                    "functional_ok": report.functional_ok}
        with open(os.path.join(run.out, "report.json"), "w", encoding="utf-8") as handle:
            json.dump(document, handle, indent=2, sort_keys=True)
        write_roofline_csv([point], os.path.join(run.out, "roofline.csv"))
        write_util_csv(report.util, os.path.join(run.out, "util.csv"))
        if run.trace:
            pd.DataFrame(result.unit_trace, columns=["cycle", "lane", "unit", "busy"]).to_csv(
                os.path.join(run.out, "unit_trace.csv"), index=False, encoding="utf-8")
            pd.DataFrame(result.port_trace, columns=["cycle", "bytes"]).to_csv(
                os.path.join(run.out, "port_trace.csv"), index=False, encoding="utf-8")
        logger.info("%s: %d cycles, %.3f dpflop/cycle, %.1f%% below bound, functional %s",
                    report.kernel, report.cycles, report.performance, point.loss_pct,
                    "ok" if report.functional_ok else "MISMATCH")
        if report.functional_ok is False:
            raise FunctionalMismatch(f"{report.kernel}: max relative error {report.max_rel_error:.3e}")
        return EXIT_OK

    def sweep(self, settings: Dict[str, Any]) -> int:
        base = run_config(settings)
        sweep = SweepConfig(lanes=_split(settings.get("lanes", Config.LANES)),
                            sizes=_split(settings.get("n", base.kernel.n)), base=base)
        results = SweepRunner(int(settings["workers"]) if "workers" in settings else None).run(sweep)
        os.makedirs(base.out, exist_ok=True)
        write_roofline_csv([point for _, point in results], os.path.join(base.out, "roofline.csv"))
        with open(os.path.join(base.out, "sweep.json"), "w", encoding="utf-8") as handle:
            json.dump([report.model_dump(exclude={"util"}) for report, _ in results], handle, indent=2)
        return EXIT_OK

    def compare(self, report_path: str, golden_path: str) -> int:
        verdicts = compare_files(report_path, golden_path)
        print(format_table(verdicts))
        return EXIT_OK if all(v.passed for v in verdicts) else EXIT_MISMATCH


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    system = VectorSimSystem()
    try:
        if args.command == "compare":
            return system.compare(args.report, args.golden)
        settings = merge_settings(args)
        if args.command == "sweep":
            return system.sweep(settings)
        return system.run(run_config(settings))
    except (ConfigError, ValidationError) as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except FunctionalMismatch as exc:
        logger.error("functional mismatch: %s", exc)
        return EXIT_MISMATCH
    except SimulationError as exc:
        logger.error("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
