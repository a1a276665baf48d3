"""Command-line entry point: ``confbeam {run,trial,sweep}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ESTIMATORS, METHODS, PROFILES, ConfigError, from_profile, load_config
from .experiment import run_experiment, run_trial
from .report import (
    POINT_COLUMNS,
    REPORT_COLUMNS,
    emit_report,
    metadata_path,
    report_metadata,
    write_rows,
)


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat TOML file of ExperimentConfig fields")
    parser.add_argument("--out", type=Path, help="output CSV path")
    parser.add_argument("--seed", type=int, help="base seed (64-bit unsigned)")
    parser.add_argument("--profile", choices=sorted(PROFILES), default="full")
    parser.add_argument("--method", choices=METHODS)
    parser.add_argument("--estimator", choices=ESTIMATORS)
    parser.add_argument("--alpha-grid", type=_floats, help="comma-separated alphas")
    parser.add_argument("--trials", type=int, help="override n_trials")
    parser.add_argument("--workers", type=int, default=1, help="worker processes for trials")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="confbeam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a full experiment and write the aggregate CSV")
    _common(run)

    trial = sub.add_parser("trial", help="run one trial and dump per-point results")
    _common(trial)
    trial.add_argument("--index", type=int, default=0, help="trial index")

    sweep = sub.add_parser("sweep", help="repeat the experiment over an SNR grid")
    _common(sweep)
    sweep.add_argument(
        "--snr-grid", type=_floats, required=True,
        help="comma-separated SNR values in dB, applied to both pilot and data SNR",
    )
    return parser


def config_from_args(args):
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.method is not None:
        overrides["method"] = args.method
    if args.estimator is not None:
        overrides["estimator"] = args.estimator
    if args.alpha_grid is not None:
        overrides["alpha_grid"] = args.alpha_grid
    if args.trials is not None:
        overrides["n_trials"] = args.trials
    if args.config is not None:
        return load_config(args.config, args.profile, **overrides)
    return from_profile(args.profile, **overrides)


def _run(args, config) -> None:
    report = run_experiment(config, workers=args.workers)
    out = args.out or Path("results.csv")
    emit_report(report, out)
    for row in report.rows():
        print(
            f"{row['method']:>9} alpha={row['alpha']:.3f} coverage={row['coverage_mean']:.4f} "
            f"outage={row['outage_mean']:.4f} rate={row['rate_mean']:.4f}"
        )
    print(f"wrote {out}")


def _trial(args, config) -> None:
    metrics = run_trial(config, args.index, keep_points=True)
    out = args.out or Path(f"trial_{args.index}.csv")
    write_rows(out, POINT_COLUMNS, metrics.points)
    for i, method in enumerate(metrics.methods):
        for j, alpha in enumerate(metrics.alphas):
            print(
                f"{method:>9} alpha={alpha:.3f} coverage={metrics.coverage[i, j]:.3f} "
                f"outage={metrics.outage[i, j]:.3f} rate={metrics.avg_rate[i, j]:.4f}"
            )
    print(f"wrote {out}")


def _sweep(args, config) -> None:
    out = args.out or Path("sweep.csv")
    rows, meta = [], []
    for snr in args.snr_grid:
        report = run_experiment(config.replace(snr_tr_db=snr, snr_db=snr), workers=args.workers)
        rows += [{"snr_db": snr, **row} for row in report.rows()]
        meta.append(report_metadata(report))
        print(f"snr={snr:g} dB done")
    write_rows(out, ("snr_db",) + REPORT_COLUMNS, rows)
    metadata_path(out).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        config = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"confbeam: {exc}", file=sys.stderr)
        return 2
    {"run": _run, "trial": _trial, "sweep": _sweep}[args.command](args, config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
