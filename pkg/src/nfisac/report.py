"""Deterministic CSV/JSON report writers.

Floats are rendered with 17 significant digits, which round-trips IEEE
doubles exactly, so identical inputs always produce identical bytes.
"""

from __future__ import annotations

import json
import math

METRICS_HEADER = "method,size,trials,pd,pd_ci,pfa,pfa_ci,range_mse_m2"
E2E_HEADER = "user_r,user_theta_deg,detected,mode,se_bits,se_upper,se_lower"


def format_float(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def _metrics_row(report) -> list:
    return [
        report.method,
        report.size,
        report.trials,
        report.pd,
        report.pd_ci,
        report.pfa,
        report.pfa_ci,
        report.range_mse_m2,
    ]


def _render(value) -> str:
    if isinstance(value, float) or value is None:
        return format_float(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def write_metrics_csv(reports, path) -> None:
    with open(path, "w") as fh:
        fh.write(METRICS_HEADER + "\n")
        for rep in reports:
            fh.write(",".join(_render(v) for v in _metrics_row(rep)) + "\n")


def write_metrics_json(reports, path) -> None:
    keys = METRICS_HEADER.split(",")
    rows = []
    for rep in reports:
        row = {}
        for key, value in zip(keys, _metrics_row(rep)):
            if isinstance(value, float):
                value = float(format_float(value))
            row[key] = value
        rows.append(row)
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_e2e_csv(rows, path) -> None:
    keys = E2E_HEADER.split(",")
    with open(path, "w") as fh:
        fh.write(E2E_HEADER + "\n")
        for row in rows:
            fh.write(",".join(_render(row[k]) for k in keys) + "\n")


def write_e2e_json(rows, path) -> None:
    keys = E2E_HEADER.split(",")
    out = []
    for row in rows:
        item = {}
        for k in keys:
            value = row[k]
            if isinstance(value, float):
                value = float(format_float(value))
            item[k] = value
        out.append(item)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_report(report, path, format: str = "csv") -> None:
    """Write one metrics report (or a list) as CSV or its JSON mirror."""
    reports = report if isinstance(report, (list, tuple)) else [report]
    if format == "csv":
        write_metrics_csv(reports, path)
    elif format == "json":
        write_metrics_json(reports, path)
    else:
        raise ValueError(f"unknown format {format!r}")


def write_coverage_csv(coverage, path) -> None:
    with open(path, "w") as fh:
        fh.write("theta_deg,r_m,value\n")
        for j, theta in enumerate(coverage.theta_centers_rad):
            for i, r in enumerate(coverage.r_centers_m):
                fh.write(
                    f"{format_float(math.degrees(theta))},{format_float(r)},"
                    f"{format_float(coverage.values[j, i])}\n"
                )
