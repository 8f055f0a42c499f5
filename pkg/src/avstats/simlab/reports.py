"""Simulation report model and its JSON/CSV serialization.

Schema (version 1):

* ``<name>.json``: ``{"schema_version", "scenario", "estimates", "checks",
  "timing"}``.  Every field except ``timing`` is a pure function of the
  scenario, so two runs of the same scenario and seed produce identical
  bytes once the timing key is dropped.
* ``<name>.csv``: the raw estimates, fixed three-column header
  ``name,value,std_error``.

Every point estimate carries its Monte Carlo standard error, and every
pass/fail check is an interval gate ``lower <= estimate <= upper`` with the
3-standard-error slack already folded into the bounds.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "Estimate",
    "BoundCheck",
    "SimReport",
    "write_report",
    "read_report",
    "report_to_json",
    "mc_estimate",
]


@dataclass(frozen=True)
class Estimate:
    name: str
    value: float
    std_error: float


@dataclass(frozen=True)
class BoundCheck:
    """Gate ``lower <= estimate <= upper``; a missing side is unconstrained."""

    name: str
    estimate: float
    std_error: float
    lower: float | None
    upper: float | None

    @property
    def passed(self) -> bool:
        if self.lower is not None and not self.estimate >= self.lower:
            return False
        if self.upper is not None and not self.estimate <= self.upper:
            return False
        return True


@dataclass(frozen=True)
class SimReport:
    """Scenario echo plus estimates, bound checks, and wall time."""

    scenario_dict: dict
    estimates: tuple[Estimate, ...] = ()
    checks: tuple[BoundCheck, ...] = ()
    wall_time_s: float = 0.0

    @property
    def all_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def name(self) -> str:
        return self.scenario_dict["name"]


def report_to_json(report: SimReport, include_timing: bool = True) -> str:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "scenario": report.scenario_dict,
        "estimates": [
            {"name": e.name, "value": e.value, "std_error": e.std_error}
            for e in report.estimates
        ],
        "checks": [
            {
                "name": c.name,
                "estimate": c.estimate,
                "std_error": c.std_error,
                "lower": c.lower,
                "upper": c.upper,
                "passed": c.passed,
            }
            for c in report.checks
        ],
    }
    if include_timing:
        payload["timing"] = {"wall_time_s": report.wall_time_s}
    return json.dumps(payload, indent=2) + "\n"


def _estimates_csv(report: SimReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["name", "value", "std_error"])
    for e in report.estimates:
        writer.writerow([e.name, repr(e.value), repr(e.std_error)])
    return buffer.getvalue()


def write_report(report: SimReport, out_dir) -> tuple[str, str]:
    """Write ``<name>.json`` and ``<name>.csv`` under ``out_dir``; returns the paths."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        json_path = os.path.join(out_dir, f"{report.name}.json")
        csv_path = os.path.join(out_dir, f"{report.name}.csv")
        with open(json_path, "w", encoding="utf-8") as fh:
            fh.write(report_to_json(report))
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(_estimates_csv(report))
    except OSError as exc:
        raise IOError(f"cannot write report under {out_dir!r}: {exc}") from exc
    return json_path, csv_path


def read_report(json_path) -> SimReport:
    """Round-trip loader for a written report."""
    with open(json_path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise InvalidInputError(f"unsupported schema version {payload.get('schema_version')!r}")
    estimates = tuple(
        Estimate(name=e["name"], value=e["value"], std_error=e["std_error"])
        for e in payload["estimates"]
    )
    checks = tuple(
        BoundCheck(
            name=c["name"],
            estimate=c["estimate"],
            std_error=c["std_error"],
            lower=c["lower"],
            upper=c["upper"],
        )
        for c in payload["checks"]
    )
    return SimReport(
        scenario_dict=payload["scenario"],
        estimates=estimates,
        checks=checks,
        wall_time_s=payload.get("timing", {}).get("wall_time_s", 0.0),
    )


def mc_estimate(name: str, values) -> Estimate:
    """Mean and empirical-variance standard error of per-replication values."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError("estimate requires a nonempty 1-d value array")
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return Estimate(name=name, value=float(arr.mean()), std_error=se)
