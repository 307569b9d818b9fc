"""Command line front end: sweep, correlate, benchmark and calibrate scenarios."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .harness import (
    BENCH_DISTANCES,
    SWEEP_DISTANCES,
    ExperimentConfig,
    calibrate,
    emit_benchmark_report,
    emit_calibration_report,
    emit_correlation_report,
    emit_sweep_report,
    run_correlation_study,
    run_distance_sweep,
    run_policy_benchmark,
)

DEFAULT_SEED = 7


def _parse_distances(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad distance list: {text!r}")
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("distances must be positive")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim",
        description="Simulate an RF-powered tag, its reader, and execution scheduling policies.",
    )
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in ("sweep", "correlate", "benchmark", "calibrate"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="flat key=value config file")
        # reproducibility is deliberate: benchmarks refuse to run without a seed
        p.add_argument("--seed", type=int, default=None, help="64-bit experiment seed")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--distances", type=_parse_distances, default=None)
        p.add_argument("--policy", choices=("cem", "iem", "readme"), default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--plot", action="store_true", help="also emit an SVG chart")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a single config key (repeatable)",
        )
    return parser


def _overrides_from_args(args) -> dict[str, object]:
    overrides: dict[str, object] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        overrides[key.strip()] = raw.strip()
    if args.policy is not None:
        overrides["policy"] = args.policy
    return overrides


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.scenario == "benchmark" and args.seed is None:
        print("error: --seed is required for benchmark runs", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else DEFAULT_SEED

    try:
        raw = _overrides_from_args(args)
        app = load_config(args.config)
        # --set values arrive as strings; reuse the file coercion path
        if raw:
            from .config import DEFAULTS, _coerce

            typed = {}
            for key, val in raw.items():
                if key not in DEFAULTS:
                    raise ConfigError(f"unknown key {key!r}")
                typed[key] = _coerce(key, str(val)) if isinstance(val, str) else val
            app = app.with_overrides(typed)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    distances = args.distances or (
        BENCH_DISTANCES if args.scenario == "benchmark" else SWEEP_DISTANCES
    )
    exp = ExperimentConfig(
        scenario=args.scenario,
        seed=seed,
        distances=list(distances),
        trials=args.trials or 10,
        out_dir=args.out,
        app=app,
        plot=args.plot,
    )

    if args.scenario == "sweep":
        rows = run_distance_sweep(exp)
        emit_sweep_report(args.out, exp, rows, plot=args.plot)
    elif args.scenario == "correlate":
        res = run_correlation_study(exp)
        emit_correlation_report(args.out, exp, res, plot=args.plot)
        print(f"pearson: {res.coefficient:.6f}")
    elif args.scenario == "benchmark":
        results, summary = run_policy_benchmark(exp)
        emit_benchmark_report(args.out, exp, results, summary, plot=args.plot)
    elif args.scenario == "calibrate":
        res = calibrate(exp)
        emit_calibration_report(args.out, exp, res)
        if not res.feasible:
            print(f"infeasible: {res.notes}", file=sys.stderr)
            return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
