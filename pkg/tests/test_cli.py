import json
import os
import subprocess
import sys

import pytest

from lipsync_eval.cli import parse_offsets, run
from lipsync_eval.errors import ConfigError


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    assert run(["synth", "--out-dir", str(root), "--clips", "4", "--offset", "2", "--noise", "0.0002"]) == 0
    return root


def _load(path):
    return json.loads(path.read_text())


def test_mtm_identical_manifests(corpus, tmp_path):
    out = tmp_path / "r.json"
    gt = str(corpus / "gt.json")
    assert run(["mtm", "--gt", gt, "--pred", gt, "--out", str(out)]) == 0
    doc = _load(out)
    assert doc["metric"] == "mtm" and doc["aggregate"] == 0.0 and doc["unit"] == "ms"
    assert doc["parameters"]["run_config"]["sigma"] == 1.0


def test_mtm_delayed_predictions(corpus, tmp_path):
    out = tmp_path / "r.csv"
    rc = run(["mtm", "--gt", str(corpus / "gt.json"), "--pred", str(corpus / "pred.json"),
              "--out", str(out), "--format", "csv"])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "clip_id,value" and lines[-1].startswith("AGGREGATE,")
    assert abs(float(lines[-1].split(",")[1]) - 80) <= 20


def test_sweep_writes_svg(corpus, tmp_path):
    out, svg = tmp_path / "s.json", tmp_path / "s.svg"
    rc = run(["mtm", "--gt", str(corpus / "gt.json"), "--sweep-offsets", "0..10",
              "--out", str(out), "--plot", str(svg)])
    assert rc == 0
    text = svg.read_text()
    assert text.startswith("<svg") or text.startswith("<?xml")
    assert text.count('class="point"') == 11
    values = [v for _, v in sorted(_load(out)["per_clip"].items())]
    assert len(values) == 11
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_slcc_lve_plrs_loss(corpus, tmp_path):
    gt, pred = str(corpus / "gt.json"), str(corpus / "pred.json")
    for cmd in (
        ["slcc", "--gt", gt, "--pred", pred],
        ["slcc", "--gt", gt, "--reference", "0.34", "--eye-normalize"],
        ["lve", "--gt", gt, "--pred", pred, "--reduction", "mean"],
        ["plrs", "--pred", pred],
        ["loss", "--gt", gt, "--mae", "0.5", "--lambda", "0.1"],
    ):
        out = tmp_path / f"{cmd[0]}.json"
        assert run(cmd + ["--out", str(out)]) == 0, cmd
    s = _load(tmp_path / "slcc.json")
    assert s["parameters"]["delta"] == pytest.approx(abs(s["aggregate"] - 0.34))
    assert set(_load(tmp_path / "lve.json")["per_clip"]) == {f"clip_{n:03d}" for n in range(4)}
    assert -1 <= _load(tmp_path / "plrs.json")["aggregate"] <= 1
    loss = _load(tmp_path / "loss.json")
    assert loss["parameters"]["total_stage1"] == pytest.approx(0.5 + 0.1 * loss["aggregate"])


def test_report_merge(corpus, tmp_path):
    gt = str(corpus / "gt.json")
    a, b, merged = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "m.json"
    assert run(["mtm", "--gt", gt, "--pred", gt, "--out", str(a)]) == 0
    assert run(["plrs", "--gt", gt, "--out", str(b)]) == 0
    assert run(["report", str(a), str(b), "--out", str(merged)]) == 0
    assert set(_load(merged)) == {"mtm", "plrs"}
    assert run(["report", str(a), str(a), "--out", str(merged)]) == 2


def test_exit_codes(corpus, tmp_path, capsys):
    out = str(tmp_path / "x.json")
    assert run(["bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert run(["mtm", "--gt", str(tmp_path / "none.json"), "--pred", "x", "--out", out]) == 2
    assert run(["mtm", "--gt", str(corpus / "gt.json"), "--out", out]) == 2
    assert run(["mtm", "--gt", str(corpus / "gt.json"), "--sweep-offsets", "a..b", "--out", out]) == 2
    assert not os.path.exists(out)


def test_data_error_exits_3(corpus, tmp_path):
    bad = tmp_path / "bad"
    bad.mkdir()
    manifest = _load(corpus / "gt.json")
    manifest["clips"] = manifest["clips"][:1]
    clip = manifest["clips"][0]
    (bad / "broken.msh").write_bytes((corpus / clip["mesh"]).read_bytes()[:40])
    clip["mesh"] = "broken.msh"
    clip.pop("audio", None)
    clip.pop("embeddings", None)
    (bad / "m.json").write_text(json.dumps(manifest))
    out = tmp_path / "r.json"
    assert run(["mtm", "--gt", str(bad / "m.json"), "--pred", str(bad / "m.json"), "--out", str(out)]) == 3
    assert not out.exists()


def test_jobs_do_not_change_bytes(corpus, tmp_path, monkeypatch):
    args = ["slcc", "--gt", str(corpus / "gt.json"), "--pred", str(corpus / "pred.json")]
    blobs = []
    for jobs in ("1", "3"):
        out = tmp_path / f"j{jobs}.json"
        assert run(args + ["--out", str(out), "--jobs", jobs]) == 0
        blobs.append(out.read_bytes())
    monkeypatch.setenv("LIPSYNC_EVAL_JOBS", "2")
    out = tmp_path / "env.json"
    assert run(args + ["--out", str(out)]) == 0
    blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]
    monkeypatch.setenv("LIPSYNC_EVAL_JOBS", "zero")
    assert run(args + ["--out", str(out)]) == 2


def test_parse_offsets():
    assert parse_offsets("0..3") == [0, 1, 2, 3]
    assert parse_offsets("1,4") == [1, 4]
    with pytest.raises(ConfigError):
        parse_offsets("x")


def test_console_entry_point(corpus, tmp_path):
    out = tmp_path / "r.json"
    gt = str(corpus / "gt.json")
    proc = subprocess.run(
        [sys.executable, "-m", "lipsync_eval", "lve", "--gt", gt, "--pred", gt, "--out", str(out)],
        capture_output=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert _load(out)["aggregate"] == 0.0
