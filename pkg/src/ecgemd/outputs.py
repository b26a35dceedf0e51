"""Writers for IMF dumps, R/S curves, cohort reports and plot-data CSVs.

Files are plain CSV/JSON for an external plotting tool; nothing here
renders images. All numbers are written with 12 significant digits.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .classify import CohortReport
from .emd import Decomposition
from .hurst import RsCurve
from .stats import EllipseParams

ELLIPSE_POINTS = 128


def _fmt(v) -> str:
    if v is None:
        return ""
    return f"{float(v):.12g}"


def _open(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def write_imfs(path, dec: Decomposition) -> None:
    """Columns ``imf_1..imf_N, residue`` with a header row."""
    cols = [imf.samples for imf in dec.imfs] + [dec.residue]
    header = [f"imf_{k}" for k in range(1, len(dec.imfs) + 1)] + ["residue"]
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in np.column_stack(cols):
            w.writerow([_fmt(v) for v in row])


def write_rs_curve(path, curve: RsCurve) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "rs_mean", "log_n", "log_rs"])
        for n, rs in curve.points:
            w.writerow([n, _fmt(rs), _fmt(math.log(n)), _fmt(math.log(rs))])


def write_hurst_table(path, rows) -> None:
    """``rows`` are dicts with imf, hurst, intercept, r_squared,
    correlation and significant keys."""
    keys = ["imf", "hurst", "intercept", "r_squared", "correlation", "significant"]
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([r["imf"]] + [_fmt(r[k]) for k in keys[1:5]]
                       + ["" if r["significant"] is None else str(r["significant"]).lower()])


def _clean(obj):
    # JSON has no NaN; absent values become null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=False)


def write_report_json(path, report: CohortReport) -> None:
    with _open(path) as fh:
        fh.write(dumps(report.to_dict()))
        fh.write("\n")


def box_rows(report: CohortReport):
    st = report.statistics
    rows = []
    for cohort, summ in st["groups"].items():
        rows.append((cohort, summ))
    for cohort, schemes in st["subgroups"].items():
        for scheme, groups in schemes.items():
            for label, summ in groups.items():
                rows.append((f"{cohort}/{label}", summ))
    return rows


def write_box_whisker(path, report: CohortReport) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "min", "q1", "median", "q3", "max"])
        for label, s in box_rows(report):
            w.writerow([label] + [_fmt(s[k]) for k in ("min", "q1", "median", "q3", "max")])


def write_scatter_ellipse(path, report: CohortReport) -> None:
    """Scatter points (``marker=point``) followed by each cohort's ellipse
    polyline (``marker=ellipse``); x is age, y is H of the first IMF."""
    st = report.statistics
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cohort", "marker", "x", "y"])
        for cohort, pts in st["scatter_by_cohort"].items():
            for age, h in pts:
                w.writerow([cohort, "point", _fmt(age), _fmt(h)])
        for cohort, e in st["ellipse_by_cohort"].items():
            params = EllipseParams(tuple(e["center"]), e["semi_major"], e["semi_minor"],
                                   e["angle_rad"], e["confidence"], e["degenerate"])
            for x, y in params.polyline(ELLIPSE_POINTS):
                w.writerow([cohort, "ellipse", _fmt(x), _fmt(y)])


def write_subgroups(path, report: CohortReport) -> None:
    keys = ["count", "mean", "median", "min", "q1", "q3", "max", "std"]
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cohort", "scheme", "group"] + keys)
        for cohort, schemes in report.statistics["subgroups"].items():
            for scheme, groups in schemes.items():
                for label, s in groups.items():
                    w.writerow([cohort, scheme, label, s["count"]]
                               + [_fmt(s[k]) for k in keys[1:]])
