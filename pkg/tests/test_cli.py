import csv
import json

import numpy as np
import pytest

from ecgemd.cli import main
from ecgemd.ingest import load_record
from ecgemd.sgolay import NORMAL_SG, sg_smooth


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out = capsys.readouterr()
    return code, out.out, out.err


def last_json(text):
    return json.loads(text.strip().splitlines()[-1])


@pytest.fixture
def tone(tmp_path, capsys):
    path = tmp_path / "tone.txt"
    code, _, _ = run(capsys, "synth", "--kind", "sine", "--freq", 5, "--amp", 1,
                     "--len", 4096, "--fs", 256, "--out", path)
    assert code == 0
    return path


@pytest.mark.parametrize("cmd", ["synth", "smooth", "decompose", "hurst", "classify", "report"])
def test_help(cmd, capsys):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0
    assert "--out-dir" in capsys.readouterr().out


def test_pipeline_help_documents_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["decompose", "--help"])
    text = capsys.readouterr().out
    for default in ("0.3", "150", "20", "25", "0.93", "10", "0.5"):
        assert default in text


def test_usage_errors(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--len", "10", "--out", str(tmp_path / "x")])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--kind", "sine", "--len", "10", "--out", str(tmp_path / "x")])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["report"])
    assert exc.value.code == 2


def test_synth_gauss_bit_identical(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for p in (a, b):
        run(capsys, "synth", "--kind", "gauss_noise", "--sigma", 1, "--len", 1000,
            "--seed", 7, "--out", p)
    assert a.read_bytes() == b.read_bytes()
    x = load_record(a, 1.0).samples
    assert x.size == 1000 and abs(x.mean()) < 0.15


def test_smooth(tone, tmp_path, capsys):
    out = tmp_path / "s.txt"
    code, text, _ = run(capsys, "smooth", "--record", tone, "--fs", 256, "--out", out)
    assert code == 0 and last_json(text)["frame"] == 13
    code, text, _ = run(capsys, "smooth", "--record", tone, "--fs", 256, "--cohort", "disease",
                        "--out", out)
    assert last_json(text)["frame"] == 37
    assert load_record(out, 256).samples.size == 4096


def test_decompose_outputs(tone, tmp_path, capsys):
    code, text, _ = run(capsys, "decompose", "--record", tone, "--fs", 256,
                        "--out-dir", tmp_path / "o")
    assert code == 0
    summary = last_json(text)
    assert summary["record_id"] == "tone"
    assert summary["significant"][0] and summary["correlations"][0] > 0.99
    with open(tmp_path / "o" / "tone_imfs.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][-1] == "residue" and len(rows) == 4097
    table = np.array(rows[1:], dtype=float)
    recon = table.sum(axis=1)
    # IMFs sum back to the smoothed input
    smoothed = sg_smooth(load_record(tone, 256), NORMAL_SG).samples
    np.testing.assert_allclose(recon, smoothed, atol=1e-9)
    assert (tmp_path / "o" / "tone_hurst.csv").exists()
    assert (tmp_path / "o" / "tone_rs_imf_1.csv").exists()


def test_decompose_sd_max_flag(tone, tmp_path, capsys):
    outs = []
    for sd in ("0.2", "0.3"):
        code, text, _ = run(capsys, "decompose", "--record", tone, "--fs", 256, "--sd-max", sd,
                            "--out-dir", tmp_path / sd)
        assert code == 0
        outs.append(last_json(text))
    assert all(o["imf_count"] >= 1 for o in outs)


def test_decompose_byte_identical(tone, tmp_path, capsys):
    for d in ("a", "b"):
        run(capsys, "decompose", "--record", tone, "--fs", 256, "--out-dir", tmp_path / d)
    for name in ("tone_imfs.csv", "tone_hurst.csv", "tone_rs_imf_1.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_hurst(tmp_path, capsys):
    path = tmp_path / "n.txt"
    run(capsys, "synth", "--kind", "gauss_noise", "--sigma", 1, "--len", 8192, "--out", path)
    code, text, _ = run(capsys, "hurst", "--record", path, "--out", tmp_path / "rs.csv")
    doc = last_json(text)
    assert code == 0 and 0.4 < doc["hurst"] < 0.65 and doc["points"] == 20
    assert (tmp_path / "rs.csv").read_text().startswith("n,rs_mean,log_n,log_rs")


def test_classify_h(capsys):
    code, text, _ = run(capsys, "classify", "--h", 0.9630)
    assert code == 0 and last_json(text)["verdict"] == "disease"
    code, text, _ = run(capsys, "classify", "--h", 0.9630, "--threshold", 0.97)
    assert last_json(text)["verdict"] == "normal"


def test_classify_record(tone, capsys):
    code, text, _ = run(capsys, "classify", "--record", tone, "--fs", 256)
    doc = last_json(text)
    assert code == 0 and doc["record_id"] == "tone" and doc["verdict"] in ("normal", "disease")


def test_report_fixture(tmp_path, capsys):
    code, text, _ = run(capsys, "report", "--fixture", "--out-dir", tmp_path)
    assert code == 0
    assert last_json(text)["accuracy"] == pytest.approx(56 / 59)
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["report_version"] == 1 and len(doc["per_record"]) == 59
    for name in ("box_whisker.csv", "scatter_ellipse.csv", "subgroups.csv"):
        assert (tmp_path / name).stat().st_size > 0
    with open(tmp_path / "scatter_ellipse.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert sum(r["marker"] == "ellipse" for r in rows) == 2 * 128


def test_report_threshold(tmp_path, capsys):
    code, text, _ = run(capsys, "report", "--fixture", "--threshold", 1.5, "--out-dir", tmp_path)
    assert last_json(text)["counts"]["correct"] == 18


def test_report_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        run(capsys, "report", "--fixture", "--out-dir", tmp_path / d)
    for name in ("report.json", "box_whisker.csv", "scatter_ellipse.csv", "subgroups.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_report_empty_manifest(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"records": []}))
    code, _, err = run(capsys, "report", "--manifest", m, "--out-dir", tmp_path)
    assert code == 1 and "no records" in err


def test_report_manifest(tone, tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"records": [
        {"id": "t", "path": str(tone), "sampling_hz": 256, "cohort": "normal", "age": 40}]}))
    code, text, _ = run(capsys, "report", "--manifest", m, "--jobs", 1,
                        "--out-dir", tmp_path / "o")
    assert code == 0 and last_json(text)["counts"]["total"] == 1


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"h_threshold": 1.5}))
    code, text, _ = run(capsys, "report", "--fixture", "--config", cfg, "--out-dir", tmp_path)
    assert last_json(text)["counts"]["correct"] == 18
    code, text, _ = run(capsys, "report", "--fixture", "--config", cfg, "--threshold", 0.93,
                        "--out-dir", tmp_path)
    assert last_json(text)["counts"]["correct"] == 56
    cfg.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(SystemExit) as exc:
        main(["report", "--fixture", "--config", str(cfg)])
    assert exc.value.code == 2


def test_global_flag_before_subcommand(tmp_path, capsys):
    code, _, _ = run(capsys, "--out-dir", tmp_path / "g", "report", "--fixture")
    assert code == 0 and (tmp_path / "g" / "report.json").exists()
