"""Command-line interface: ``ecgemd <subcommand> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import outputs
from .classify import (DEFAULT_THRESHOLD, ClassifierConfig, RecordMeta, classify_h,
                       load_fixture, run_cohort, run_fixture, run_record)
from .emd import BOUNDARIES, SiftConfig
from .hurst import RsConfig, interpret_h, rs_curve
from .ingest import COHORTS, load_manifest, load_record, synth_signal, write_record
from .sgolay import DISEASE_SG, NORMAL_SG, SgParams, sg_smooth
from .significance import DEFAULT_ETA

log = logging.getLogger("ecgemd")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a run needs; loaded from ``--config`` JSON, then
    overridden by explicit flags."""
    h_threshold: float = DEFAULT_THRESHOLD
    eta: float = DEFAULT_ETA
    sd_max: float = 0.3
    max_sift_iters: int = 150
    max_imfs: int = 20
    spline_boundary: str = "mirror"
    sg: dict = field(default_factory=dict)  # cohort -> {"order": .., "frame": ..}
    n_min: int = 10
    n_max_fraction: float = 0.5
    grid_points: int = 20
    std: str = "population"
    smooth: bool = True
    manifest: Optional[str] = None
    out_dir: str = "."
    jobs: Optional[int] = None
    strict: bool = False

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        cfg = cls()
        flat = dict(doc)
        rs = flat.pop("rs", None)
        if isinstance(rs, dict):
            flat.update(rs)
        for key, value in flat.items():
            if not hasattr(cfg, key):
                raise UsageError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
        return cfg

    def classifier(self) -> ClassifierConfig:
        sg = {}
        for cohort, p in (self.sg or {}).items():
            if cohort not in COHORTS:
                raise UsageError(f"config sg: unknown cohort {cohort!r}")
            sg[cohort] = SgParams(int(p["order"]), int(p["frame"]))
        return ClassifierConfig(
            h_threshold=self.h_threshold,
            eta=self.eta,
            sift=SiftConfig(self.sd_max, self.max_sift_iters, self.max_imfs,
                            self.spline_boundary),
            rs=RsConfig(self.n_min, self.n_max_fraction, self.grid_points, self.std),
            sg_params_by_cohort=sg,
            smooth=self.smooth,
        )


# flag dest -> RunConfig attribute
_OVERRIDES = {
    "threshold": "h_threshold", "eta": "eta", "sd_max": "sd_max",
    "max_sift_iters": "max_sift_iters", "max_imfs": "max_imfs",
    "boundary": "spline_boundary", "n_min": "n_min",
    "n_max_fraction": "n_max_fraction", "grid_points": "grid_points",
    "std": "std", "manifest": "manifest", "out_dir": "out_dir",
    "jobs": "jobs", "strict": "strict",
}


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if getattr(args, "config", None) else RunConfig()
    for dest, attr in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            setattr(cfg, attr, value)
    if getattr(args, "no_smooth", False):
        cfg.smooth = False
    order, frame = getattr(args, "sg_order", None), getattr(args, "sg_frame", None)
    if order is not None or frame is not None:
        cohort = getattr(args, "cohort", None) or "unknown"
        base = {"disease": DISEASE_SG, "normal": NORMAL_SG}.get(cohort, NORMAL_SG)
        # flags apply to every cohort of the run
        p = {"order": order if order is not None else base.order,
             "frame": frame if frame is not None else base.frame}
        cfg.sg = {c: dict(p) for c in COHORTS}
    return cfg


def _global_flags(parser, suppress=False):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = parser.add_argument_group("global options")
    g.add_argument("--out-dir", default=d(None),
                   help="directory for output files (default: current directory)")
    g.add_argument("--jobs", type=int, default=d(None),
                   help="parallel workers for report (default: number of CPUs)")
    g.add_argument("--strict", action="store_const", const=True, default=d(None),
                   help="fail the run on the first record error")
    g.add_argument("--config", default=d(None),
                   help="JSON file overriding defaults (same keys as the flags)")
    g.add_argument("-v", "--verbose", action="store_const", const=True, default=d(None),
                   help="log progress to stderr")


def _pipeline_flags(parser):
    g = parser.add_argument_group("pipeline options")
    g.add_argument("--sg-order", type=int,
                   help="Savitzky-Golay polynomial order (default: 3)")
    g.add_argument("--sg-frame", type=int,
                   help="Savitzky-Golay frame length (default: 37 for disease, "
                        "13 otherwise)")
    g.add_argument("--no-smooth", action="store_true", help="skip smoothing")
    g.add_argument("--sd-max", type=float, help="sifting SD threshold (default: 0.3)")
    g.add_argument("--max-sift-iters", type=int,
                   help="sifting iterations per IMF (default: 150)")
    g.add_argument("--max-imfs", type=int, help="maximum number of IMFs (default: 20)")
    g.add_argument("--boundary", choices=BOUNDARIES,
                   help="envelope end treatment (default: mirror)")
    g.add_argument("--eta", type=float, help="significance ratio factor (default: 25)")
    _rs_flags(g)
    g.add_argument("--threshold", type=float,
                   help="Hurst threshold on IMF 1; H >= threshold is disease "
                        "(default: 0.93)")


def _rs_flags(g):
    g.add_argument("--n-min", type=int, help="smallest R/S sub-series length (default: 10)")
    g.add_argument("--n-max-fraction", type=float,
                   help="largest sub-series length as a fraction of the series (default: 0.5)")
    g.add_argument("--grid-points", type=int,
                   help="geometric grid size of sub-series lengths (default: 20)")
    g.add_argument("--std", choices=("population", "sample"),
                   help="standard deviation convention for R/S (default: population)")


def _record_flags(parser, need_fs=True):
    parser.add_argument("--record", required=True, help="record file (one or two columns)")
    parser.add_argument("--fs", type=float, required=need_fs, default=None if need_fs else 1.0,
                        help="sampling rate in Hz")
    parser.add_argument("--cohort", choices=COHORTS, default="unknown",
                        help="cohort label; selects smoothing defaults (default: unknown)")
    parser.add_argument("--id", default=None, help="record id (default: file stem)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecgemd",
        description="ECG smoothing, empirical mode decomposition, R/S Hurst "
                    "analysis and arrhythmia classification.")
    _global_flags(parser)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", parents=[common], help="write a synthetic test signal",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--kind", required=True, choices=("sine", "two_tone", "gauss_noise", "ramp"))
    for name in ("freq", "amp", "f1", "a1", "f2", "a2", "sigma", "slope", "offset"):
        p.add_argument(f"--{name}", type=float, default=None)
    p.add_argument("--len", type=int, required=True, dest="length")
    p.add_argument("--fs", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--time-column", action="store_true", help="write time,value lines")
    p.add_argument("--out", required=True)

    p = sub.add_parser("smooth", parents=[common], help="Savitzky-Golay smooth a record")
    _record_flags(p)
    p.add_argument("--sg-order", type=int, help="polynomial order (default: 3)")
    p.add_argument("--sg-frame", type=int,
                   help="frame length (default: 37 for disease records, 13 otherwise)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("decompose", parents=[common],
                       help="smooth + EMD + per-IMF Hurst; writes IMF and R/S CSVs")
    _record_flags(p)
    _pipeline_flags(p)

    p = sub.add_parser("hurst", parents=[common], help="R/S Hurst exponent of a series")
    _record_flags(p, need_fs=False)
    _rs_flags(p)
    p.add_argument("--out", help="write the R/S curve CSV here")

    p = sub.add_parser("classify", parents=[common],
                       help="verdict from an H value or a full pipeline run")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--h", type=float, help="H of the first IMF")
    src.add_argument("--record", help="record file to run through the pipeline")
    p.add_argument("--fs", type=float, help="sampling rate in Hz (with --record)")
    p.add_argument("--cohort", choices=COHORTS, default="unknown")
    p.add_argument("--id", default=None)
    _pipeline_flags(p)

    p = sub.add_parser("report", parents=[common],
                       help="cohort report JSON plus box-plot, scatter/ellipse and "
                            "subgroup CSVs")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--manifest", help="cohort manifest JSON (raw signals)")
    src.add_argument("--fixture", nargs="?", const="builtin",
                     help="CSV of precomputed first-IMF H values; without a path "
                          "the bundled table is used")
    _pipeline_flags(p)
    return parser


def _record_id(args) -> str:
    return args.id or Path(args.record).stem


def cmd_synth(args, cfg) -> int:
    names = ("freq", "amp", "f1", "a1", "f2", "a2", "sigma", "slope", "offset")
    params = {k: getattr(args, k) for k in names if getattr(args, k) is not None}
    try:
        signal = synth_signal(args.kind, params, args.length, args.fs, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_record(args.out, signal, with_time=args.time_column)
    print(json.dumps({"out": args.out, "samples": len(signal), "sampling_hz": signal.sampling_hz}))
    return 0


def cmd_smooth(args, cfg) -> int:
    signal = load_record(args.record, args.fs)
    params = cfg.classifier().sg_params(args.cohort, signal.sampling_hz)
    write_record(args.out, sg_smooth(signal, params))
    print(json.dumps({"out": args.out, "order": params.order, "frame": params.frame}))
    return 0


def _per_imf_rows(report):
    rows = []
    sig = report.significance
    for k, curve in enumerate(report.curves):
        rows.append({
            "imf": k + 1,
            "hurst": curve.hurst if curve else None,
            "intercept": curve.intercept if curve else None,
            "r_squared": curve.r_squared if curve else None,
            "correlation": sig.correlations[k] if sig else None,
            "significant": sig.significant[k] if sig else None,
        })
    return rows


def cmd_decompose(args, cfg) -> int:
    rid = _record_id(args)
    signal = load_record(args.record, args.fs)
    meta = RecordMeta(rid, args.cohort)
    report = run_record(signal, meta, cfg.classifier())
    out = Path(cfg.out_dir)
    dec = report.decomposition
    outputs.write_imfs(out / f"{rid}_imfs.csv", dec)
    rows = _per_imf_rows(report)
    outputs.write_hurst_table(out / f"{rid}_hurst.csv", rows)
    for k, curve in enumerate(report.curves, start=1):
        if curve is not None:
            outputs.write_rs_curve(out / f"{rid}_rs_imf_{k}.csv", curve)
    summary = {
        "record_id": rid,
        "imf_count": report.imf_count,
        "sift_counts": [imf.sift_count for imf in dec.imfs],
        "valid_imfs": [imf.valid for imf in dec.imfs],
        "hurst": [r["hurst"] for r in rows],
        "correlations": [r["correlation"] for r in rows],
        "significant": [r["significant"] for r in rows],
        "h_imf1": report.h_imf1,
        "verdict": report.verdict,
    }
    print(json.dumps(outputs._clean(summary)))
    return 0


def cmd_hurst(args, cfg) -> int:
    signal = load_record(args.record, args.fs)
    c = cfg.classifier().rs
    curve = rs_curve(signal.samples, c)
    if args.out:
        outputs.write_rs_curve(args.out, curve)
    print(json.dumps({"record_id": _record_id(args), "hurst": curve.hurst,
                      "intercept": curve.intercept, "r_squared": curve.r_squared,
                      "points": len(curve.points), "pattern": interpret_h(curve.hurst)}))
    return 0


def cmd_classify(args, cfg) -> int:
    clf = cfg.classifier()
    if args.h is not None:
        print(json.dumps({"h_imf1": args.h, "h_threshold": clf.h_threshold,
                          "verdict": classify_h(args.h, clf)}))
        return 0
    if args.fs is None:
        raise UsageError("--fs is required with --record")
    signal = load_record(args.record, args.fs)
    rid = args.id or Path(args.record).stem
    report = run_record(signal, RecordMeta(rid, args.cohort), clf)
    print(json.dumps(outputs._clean(report.to_dict())))
    return 0


def cmd_report(args, cfg) -> int:
    clf = cfg.classifier()
    if args.fixture:
        rows = load_fixture(None if args.fixture == "builtin" else args.fixture)
        report = run_fixture(rows, clf)
    elif cfg.manifest:
        manifest = load_manifest(cfg.manifest)
        if len(manifest) == 0:
            raise ValueError(f"manifest {cfg.manifest} has no records")
        jobs = cfg.jobs if cfg.jobs is not None else (os.cpu_count() or 1)
        report = run_cohort(manifest, clf, jobs=jobs, strict=cfg.strict)
    else:
        raise UsageError("report needs --manifest or --fixture")
    out = Path(cfg.out_dir)
    outputs.write_report_json(out / "report.json", report)
    outputs.write_box_whisker(out / "box_whisker.csv", report)
    outputs.write_scatter_ellipse(out / "scatter_ellipse.csv", report)
    outputs.write_subgroups(out / "subgroups.csv", report)
    st = report.statistics
    for r in report.per_record:
        if r.error:
            print(f"warning: {r.meta.record_id}: {r.error}", file=sys.stderr)
    print(json.dumps(outputs._clean({
        "out_dir": str(out),
        "accuracy": st["accuracy"],
        "counts": st["counts"],
        "welch_p": st["welch"]["p_two_tailed"] if st["welch"] else None,
        "pearson_by_cohort": st["pearson_by_cohort"],
    })))
    return 0


COMMANDS = {
    "synth": cmd_synth, "smooth": cmd_smooth, "decompose": cmd_decompose,
    "hurst": cmd_hurst, "classify": cmd_classify, "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", None) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        cfg.classifier()
    except (UsageError, ValueError, KeyError, TypeError) as exc:
        parser.exit(2, f"ecgemd: error: {exc}\n")
    try:
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        parser.exit(2, f"ecgemd {args.command}: error: {exc}\n")
    except Exception as exc:
        print(f"ecgemd {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
