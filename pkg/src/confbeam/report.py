"""CSV and metadata output for experiment reports."""
from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .experiment import AggregateReport

REPORT_COLUMNS = (
    "method", "alpha",
    "coverage_mean", "coverage_std",
    "outage_mean", "outage_std",
    "rate_mean", "rate_std",
)
POINT_COLUMNS = (
    "trial", "point", "alpha", "method", "score", "radius",
    "covered", "rate_bar", "realized_rate", "outage",
)


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6g}"


def metadata_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_rows(path, columns, rows, extra: dict | None = None) -> None:
    """Write dict rows as CSV, optionally prefixing constant columns."""
    extra = extra or {}
    header = list(extra) + list(columns)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            merged = {**extra, **row}
            writer.writerow([_fmt(merged[c]) for c in header])


def report_metadata(report: AggregateReport) -> dict:
    return {
        "package": "confbeam",
        "version": __version__,
        "config": report.config.to_dict(),
        "rng_algorithm": report.rng_algorithm,
        "trial_seed_rule": "base_seed + trial_index",
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def emit_report(report: AggregateReport, path) -> None:
    """Write the aggregate CSV and a ``<stem>.meta.json`` sidecar next to it."""
    path = Path(path)
    write_rows(path, REPORT_COLUMNS, report.rows())
    metadata_path(path).write_text(json.dumps(report_metadata(report), indent=2, sort_keys=True) + "\n")


def read_report(path) -> list[dict]:
    """Parse a report CSV back into typed rows."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for key, value in row.items():
            if key != "method":
                row[key] = float(value)
    return rows
