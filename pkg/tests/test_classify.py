import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ecgemd.classify import (ClassifierConfig, RecordError, build_cohort_report, classify_h,
                             load_fixture, run_cohort, run_fixture, run_record)
from ecgemd.ingest import RecordMeta, TimeSeries, load_manifest, synth_signal, write_record


@pytest.mark.parametrize("h,verdict", [(0.8766, "normal"), (0.9630, "disease"),
                                       (0.93, "disease"), (0.9299999, "normal")])
def test_classify_h(h, verdict):
    assert classify_h(h) == verdict


@given(st.floats(0.01, 1.99), st.floats(0.0, 0.5))
def test_classify_monotone(h, step):
    order = {"normal": 0, "disease": 1}
    assert order[classify_h(min(h + step, 1.99))] >= order[classify_h(h)]


def test_config_validation():
    with pytest.raises(ValueError):
        ClassifierConfig(h_threshold=0)
    with pytest.raises(ValueError):
        ClassifierConfig(eta=1)
    with pytest.raises(ValueError):
        classify_h(float("nan"))


def test_run_record_tone():
    ts = synth_signal("sine", {"freq": 5, "amp": 1}, 4096, 256)
    rep = run_record(ts, RecordMeta("tone"))
    imfs = rep.decomposition.imfs
    # later modes only carry small edge leftovers
    assert all(np.ptp(m.samples) < 0.01 * np.ptp(imfs[0].samples) for m in imfs[1:])
    assert rep.significance.significant[0]
    assert rep.significance.correlations[0] > 0.99
    assert rep.h_imf1 is not None and rep.verdict in ("disease", "normal")
    assert len(rep.h_per_imf) == rep.imf_count
    d = rep.to_dict()
    json.dumps(d)
    assert d["record_id"] == "tone" and d["verdict"] == rep.verdict


def test_run_record_constant():
    rep = run_record(TimeSeries(np.full(500, 2.0), 100), RecordMeta("flat"))
    assert rep.imf_count == 0 and rep.verdict == "indeterminate" and rep.h_imf1 is None


def test_run_record_too_short():
    with pytest.raises(RecordError, match="short"):
        run_record(TimeSeries(np.arange(8.0), 100), RecordMeta("tiny", "disease"))


def _manifest(tmp_path, n=3):
    recs = []
    for i in range(n):
        ts = synth_signal("two_tone", {"f1": 8 + i, "a1": 1, "f2": 1, "a2": 0.5}, 1024, 256)
        write_record(tmp_path / f"r{i}.txt", ts)
        recs.append({"id": f"r{i}", "path": f"r{i}.txt", "sampling_hz": 256,
                     "cohort": "disease" if i % 2 else "normal", "age": 30 + 10 * i,
                     "gender": "male" if i % 2 else "female"})
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"description": "synthetic", "records": recs}))
    return load_manifest(path)


def test_run_cohort_parallel_matches_sequential(tmp_path):
    m = _manifest(tmp_path, 4)
    seq = run_cohort(m, jobs=1)
    par = run_cohort(m, jobs=2)
    assert json.dumps(seq.to_dict()) == json.dumps(par.to_dict())
    assert [r.meta.record_id for r in seq.per_record] == ["r0", "r1", "r2", "r3"]
    c = seq.statistics["counts"]
    assert c["total"] == 4 and c["classified"] + c["indeterminate"] == 4


def test_run_cohort_single_record(tmp_path):
    m = _manifest(tmp_path, 1)
    rep = run_cohort(m)
    st_ = rep.statistics
    assert st_["welch"] is None
    assert any("welch" in n for n in st_["notices"])
    assert rep.accuracy in (0.0, 1.0, None)


def test_run_cohort_record_failure(tmp_path):
    m = _manifest(tmp_path, 2)
    (tmp_path / "r1.txt").write_text("1\nbad\n")
    rep = run_cohort(m)
    failed = [r for r in rep.per_record if r.error]
    assert [r.meta.record_id for r in failed] == ["r1"]
    assert rep.statistics["counts"]["failed"] == 1
    with pytest.raises(Exception):
        run_cohort(m, strict=True)


def test_fixture_accuracy_and_totals():
    rows = load_fixture()
    assert len(rows) == 59
    rep = run_fixture(rows)
    c = rep.statistics["counts"]
    assert c["correct"] == 56 and c["labelled"] == 59
    assert rep.accuracy == pytest.approx(56 / 59)
    assert c["classified"] + c["indeterminate"] == c["total"]
    groups = rep.statistics["groups"]
    assert groups["normal"]["count"] + groups["disease"]["count"] == 59


def test_fixture_errors(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("record_id,cohort,age,gender,h_imf1\na,normal,,,0.8\na,normal,,,0.9\n")
    with pytest.raises(ValueError, match="duplicate"):
        load_fixture(p)
    p.write_text("id,h\n")
    with pytest.raises(ValueError, match="header"):
        load_fixture(p)
    with pytest.raises(ValueError):
        run_fixture([])


def test_threshold_changes_accuracy():
    rep = run_fixture(load_fixture(), ClassifierConfig(h_threshold=1.5))
    assert rep.statistics["counts"]["correct"] == 18


def test_report_ordering_independent_of_input():
    rows = load_fixture()
    a = run_fixture(rows)
    b = run_fixture(rows[::-1])
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_build_report_without_labels():
    rep = build_cohort_report(())
    assert rep.accuracy is None
