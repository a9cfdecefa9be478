"""Command-line entry point: ``run``, ``sweep`` and ``calibrate``.

Exit status: 0 on success, 1 if any scenario (or calibration check) failed,
2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .calibration import run_calibration
from .config import ConfigError, ScenarioConfig
from .runner import DEFAULT_REPEATS, SweepOutcome, expand_repeats, load_grid, sweep

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sifm", description="Flow-mobility simulation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario configuration")
    run.add_argument("--config", required=True, type=Path, help="scenario JSON file")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--repeats", type=_positive, default=1,
                     help="number of consecutive seeds to run (default 1)")
    run.add_argument("--out", type=Path, help="CSV output path (default: stdout)")

    sw = sub.add_parser("sweep", help="run every scenario of a grid file")
    sw.add_argument("--grid", required=True, type=Path, help="grid JSON file")
    sw.add_argument("--out", required=True, type=Path, help="CSV output path")
    sw.add_argument("--parallel", type=_positive, default=1, help="worker processes (default 1)")
    sw.add_argument("--repeats", type=_positive, default=None,
                    help=f"seeds per grid point (default: the grid's 'repeats', else {DEFAULT_REPEATS})")

    sub.add_parser("calibrate", help="check WiFi and LTE link calibration")
    return parser


def _write(outcome: SweepOutcome, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(outcome.csv)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(outcome.csv)


def _report(outcome: SweepOutcome) -> int:
    for scenario_id, _ in outcome.failures:
        print(f"scenario failed: {scenario_id}", file=sys.stderr)
    return EXIT_FAILED if outcome.failures else EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = ScenarioConfig.load(args.config)
    if args.seed is not None:
        custom = cfg.scenario_id != cfg.default_id()
        cfg = cfg.with_(seed=args.seed, scenario_id=cfg.scenario_id if custom else "")
    outcome = sweep(expand_repeats(cfg, args.repeats))
    _write(outcome, args.out)
    return _report(outcome)


def cmd_sweep(args: argparse.Namespace) -> int:
    configs = load_grid(args.grid, args.repeats)
    outcome = sweep(configs, parallel=args.parallel)
    _write(outcome, args.out)
    return _report(outcome)


def cmd_calibrate(args: argparse.Namespace) -> int:
    results = run_calibration()
    for result in results:
        print(result.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "sweep": cmd_sweep, "calibrate": cmd_calibrate}[args.command]
    try:
        return handler(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
