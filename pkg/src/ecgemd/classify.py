"""Per-record arrhythmia verdicts and cohort report assembly."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import stats
from .emd import Decomposition, SiftConfig, decompose
from .hurst import RsConfig, RsCurve, RsFitError, rs_curve
from .ingest import CohortManifest, RecordMeta, TimeSeries, load_record
from .sgolay import SgParams, default_sg_params, sg_smooth
from .significance import DEFAULT_ETA, SignificanceReport, select_significant

log = logging.getLogger(__name__)

REPORT_VERSION = 1
DEFAULT_THRESHOLD = 0.93
VERDICTS = ("disease", "normal", "indeterminate")


class RecordError(RuntimeError):
    """A pipeline stage failed for one record."""

    def __init__(self, record_id: str, message: str):
        super().__init__(f"record {record_id}: {message}")
        self.record_id = record_id


@dataclass(frozen=True)
class ClassifierConfig:
    h_threshold: float = DEFAULT_THRESHOLD
    eta: float = DEFAULT_ETA
    sift: SiftConfig = SiftConfig()
    rs: RsConfig = RsConfig()
    # cohort -> SgParams; cohorts left out fall back to the built-in defaults
    sg_params_by_cohort: Mapping = field(default_factory=dict)
    smooth: bool = True

    def __post_init__(self):
        if not 0 < self.h_threshold < 2:
            raise ValueError(f"h_threshold must lie in (0, 2), got {self.h_threshold}")
        if self.eta <= 1:
            raise ValueError(f"eta must exceed 1, got {self.eta}")

    def sg_params(self, cohort: str, sampling_hz: float) -> SgParams:
        if cohort in self.sg_params_by_cohort:
            return self.sg_params_by_cohort[cohort]
        return default_sg_params(cohort, sampling_hz)


@dataclass(frozen=True)
class RecordReport:
    meta: RecordMeta
    imf_count: Optional[int]
    h_per_imf: tuple
    significance: Optional[SignificanceReport]
    h_imf1: Optional[float]
    verdict: str
    error: Optional[str] = None
    # bulky intermediates, kept for the CLI dumps and never serialized
    smoothed: Optional[TimeSeries] = field(default=None, repr=False, compare=False)
    decomposition: Optional[Decomposition] = field(default=None, repr=False, compare=False)
    curves: tuple = field(default=(), repr=False, compare=False)

    def to_dict(self) -> dict:
        m = self.meta
        return {
            "record_id": m.record_id,
            "cohort": m.cohort,
            "age": m.age,
            "gender": m.gender,
            "lead": m.lead,
            "imf_count": self.imf_count,
            "h_per_imf": list(self.h_per_imf),
            "significance": self.significance.to_dict() if self.significance else None,
            "h_imf1": self.h_imf1,
            "verdict": self.verdict,
            "error": self.error,
        }

    def slim(self) -> "RecordReport":
        return replace(self, smoothed=None, decomposition=None, curves=())


@dataclass(frozen=True)
class CohortReport:
    per_record: tuple
    statistics: dict

    @property
    def accuracy(self) -> Optional[float]:
        return self.statistics["accuracy"]

    def to_dict(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "per_record": [r.to_dict() for r in self.per_record],
            "cohort_statistics": self.statistics,
        }


def classify_h(h: float, config: ClassifierConfig = ClassifierConfig()) -> str:
    """``disease`` when ``h >= h_threshold`` (ties go to disease)."""
    if not np.isfinite(h):
        raise ValueError("h must be finite")
    return "disease" if h >= config.h_threshold else "normal"


def run_record(signal: TimeSeries, meta: RecordMeta,
               config: ClassifierConfig = ClassifierConfig()) -> RecordReport:
    """Smooth, decompose, test IMF significance, estimate H per IMF and
    classify on the first IMF.

    A first IMF that is not significant makes the verdict
    ``indeterminate``. H is still reported for every IMF.
    """
    rid = meta.record_id
    try:
        x = signal
        if config.smooth:
            x = sg_smooth(signal, config.sg_params(meta.cohort, signal.sampling_hz))
        dec = decompose(x, config.sift)
    except ValueError as exc:
        raise RecordError(rid, str(exc)) from exc

    if len(dec) == 0:
        return RecordReport(meta, 0, (), None, None, "indeterminate",
                            smoothed=x, decomposition=dec)

    try:
        sig = select_significant(x.samples, [imf.samples for imf in dec.imfs], config.eta)
    except ValueError as exc:
        raise RecordError(rid, str(exc)) from exc

    hs, curves = [], []
    for k, imf in enumerate(dec.imfs, start=1):
        try:
            curve = rs_curve(imf.samples, config.rs)
        except RsFitError as exc:
            log.warning("record %s IMF %d: no Hurst estimate (%s)", rid, k, exc)
            curve = None
        curves.append(curve)
        hs.append(curve.hurst if curve is not None else None)

    h1 = hs[0] if sig.significant[0] else None
    verdict = classify_h(h1, config) if h1 is not None else "indeterminate"
    return RecordReport(meta, len(dec), tuple(hs), sig, h1, verdict,
                        smoothed=x, decomposition=dec, curves=tuple(curves))


def _process_entry(args):
    entry, config, strict = args
    try:
        signal = load_record(entry.path, entry.sampling_hz)
        return run_record(signal, entry.meta, config).slim()
    except Exception as exc:  # recorded per record unless strict
        if strict:
            raise
        return RecordReport(entry.meta, None, (), None, None, "indeterminate",
                            error=f"{type(exc).__name__}: {exc}")


def _sort_key(report: RecordReport):
    return report.meta.record_id


def run_cohort(manifest: CohortManifest, config: ClassifierConfig = ClassifierConfig(),
               jobs: int = 1, strict: bool = False) -> CohortReport:
    """Run every manifest record and aggregate cohort statistics.

    Records are processed in parallel when ``jobs > 1``; output is sorted
    by record id, so it does not depend on scheduling.
    """
    if len(manifest) == 0:
        raise ValueError("manifest has no records")
    work = [(e, config, strict) for e in manifest.entries]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_process_entry, work))
    else:
        reports = [_process_entry(w) for w in work]
    for r in reports:
        if r.error:
            log.warning("record %s failed: %s", r.meta.record_id, r.error)
    return build_cohort_report(reports, config)


def load_fixture(path=None) -> list:
    """Read ``record_id,cohort,age,gender,h_imf1`` rows into ``(meta, h)``
    pairs; blank cells mean absent. Without ``path`` the bundled table of
    first-IMF Hurst exponents is used."""
    if path is None:
        text = resources.files("ecgemd").joinpath("data/first_imf_h.csv").read_text(encoding="utf-8")
        source = "first_imf_h.csv"
    else:
        text = Path(path).read_text(encoding="utf-8")
        source = str(path)
    rows = []
    seen = set()
    reader = csv.DictReader(text.splitlines())
    expected = {"record_id", "cohort", "age", "gender", "h_imf1"}
    if reader.fieldnames is None or not expected <= set(reader.fieldnames):
        raise ValueError(f"{source}: header must contain {sorted(expected)}")
    for lineno, row in enumerate(reader, start=2):
        rid = row["record_id"].strip()
        if rid in seen:
            raise ValueError(f"{source}:{lineno}: duplicate record id {rid!r}")
        seen.add(rid)
        try:
            age = row["age"].strip()
            gender = row["gender"].strip()
            meta = RecordMeta(rid, row["cohort"].strip(), int(age) if age else None,
                              gender or None)
            h = row["h_imf1"].strip()
            rows.append((meta, float(h) if h else None))
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: {exc}") from None
    return rows


def run_fixture(rows, config: ClassifierConfig = ClassifierConfig()) -> CohortReport:
    """Cohort report from precomputed first-IMF Hurst exponents."""
    rows = list(rows)
    if not rows:
        raise ValueError("fixture has no records")
    reports = []
    for meta, h in rows:
        verdict = classify_h(h, config) if h is not None else "indeterminate"
        reports.append(RecordReport(meta, None, (), None, h, verdict))
    return build_cohort_report(reports, config)


def _pairs(reports, cohort):
    return [(r.meta, r.h_imf1) for r in reports
            if r.meta.cohort == cohort and r.h_imf1 is not None]


def build_cohort_report(reports: Sequence[RecordReport],
                        config: ClassifierConfig = ClassifierConfig()) -> CohortReport:
    reports = sorted(reports, key=_sort_key)
    notices = []
    classified = [r for r in reports if r.h_imf1 is not None]

    groups = {}
    for cohort in ("disease", "normal"):
        hs = [h for _, h in _pairs(reports, cohort)]
        if hs:
            groups[cohort] = stats.five_number(hs).to_dict()

    welch = None
    dis = [h for _, h in _pairs(reports, "disease")]
    nor = [h for _, h in _pairs(reports, "normal")]
    if len(dis) >= 2 and len(nor) >= 2:
        try:
            t, df, p = stats.welch_t_test(dis, nor)
            welch = {"t": t, "df": df, "p_two_tailed": p,
                     "groups": ["disease", "normal"]}
        except stats.DegenerateDataError as exc:
            notices.append(f"welch test skipped: {exc}")
    else:
        notices.append("welch test skipped: needs at least 2 classified records per cohort")

    pearson, ellipses, scatter, subgroups = {}, {}, {}, {}
    for cohort in ("disease", "normal"):
        pairs = [(m.age, h) for m, h in _pairs(reports, cohort) if m.age is not None]
        scatter[cohort] = pairs
        if len(pairs) >= 2:
            ages, hs = zip(*pairs)
            try:
                pearson[cohort] = stats.pearson_r(ages, hs)
            except stats.DegenerateDataError as exc:
                notices.append(f"pearson r for {cohort} skipped: {exc}")
        if len(pairs) >= 3:
            try:
                ellipses[cohort] = stats.confidence_ellipse(pairs).to_dict()
            except stats.DegenerateDataError as exc:
                notices.append(f"ellipse for {cohort} skipped: {exc}")
        cohort_pairs = _pairs(reports, cohort)
        if cohort_pairs:
            subgroups[cohort] = {
                scheme: {k: v.to_dict() for k, v in stats.subgroup(cohort_pairs, scheme).items()}
                for scheme in ("gender", "age_bins")
            }

    labelled = [r for r in classified if r.meta.cohort in ("disease", "normal")]
    correct = sum(r.verdict == r.meta.cohort for r in labelled)
    accuracy = correct / len(labelled) if labelled else None
    if not labelled:
        notices.append("accuracy undefined: no classified records with a known cohort")

    statistics = {
        "h_threshold": config.h_threshold,
        "counts": {
            "total": len(reports),
            "classified": len(classified),
            "indeterminate": len(reports) - len(classified),
            "failed": sum(r.error is not None for r in reports),
            "correct": correct,
            "labelled": len(labelled),
        },
        "accuracy": accuracy,
        "groups": groups,
        "welch": welch,
        "pearson_by_cohort": pearson,
        "ellipse_by_cohort": ellipses,
        "scatter_by_cohort": {k: [list(p) for p in v] for k, v in scatter.items()},
        "subgroups": subgroups,
        "notices": notices,
    }
    return CohortReport(tuple(reports), statistics)
