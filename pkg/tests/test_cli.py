import json
from pathlib import Path

import pytest

from kdretrieval.cli import main

SMALL = ["--embed-dim", "6", "--hidden-dim", "5", "--epochs", "2", "--lr", "0.01"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", "--out-dir", d, "--n-docs", 20, "--n-claims", 30, "--vocab-size", 40, "--doc-len", 6,
               "--claim-len", 4, "--overlap", 4, "--seed", 2) == 0
    assert run("build-dataset", "--corpus", d / "corpus.jsonl", "--claims", d / "claims.jsonl", "-C", 4,
               "--train-size", 20, "--dev-size", 6, "--test-size", 4, "--out-dir", d / "data") == 0
    data = ["--corpus", d / "corpus.jsonl", "--claims", d / "claims.jsonl"]
    assert run("train-teacher", *data, "--train", d / "data/train.jsonl", "--dev", d / "data/dev.jsonl", *SMALL,
               "--out", d / "teacher.ckpt") == 0
    assert run("score-teacher", *data, "--teacher", d / "teacher.ckpt", "--sets", d / "data/train.jsonl",
               d / "data/dev.jsonl", "--out", d / "cache.jsonl") == 0
    return d, data


def student(ws, out, *extra):
    d, data = ws
    return run("train-student", *data, "--train", d / "data/train.jsonl", "--dev", d / "data/dev.jsonl", *SMALL,
               *extra, "--out", out)


def test_alpha_zero_ignores_cache(ws):
    d, _ = ws
    assert student(ws, d / "s0.ckpt", "--alpha", 0) == 0
    assert student(ws, d / "s0c.ckpt", "--alpha", 0, "--cache", d / "cache.jsonl") == 0
    assert (d / "s0.ckpt").read_bytes() == (d / "s0c.ckpt").read_bytes()


def test_evaluate_oracle_scores(ws, capsys):
    d, _ = ws
    with open(d / "oracle.jsonl", "w") as f:
        for line in open(d / "data/dev.jsonl"):
            s = json.loads(line)
            f.write(json.dumps({"claim_id": s["claim_id"], "scores": s["labels"]}) + "\n")
    assert run("evaluate", "--sets", d / "data/dev.jsonl", "--scores", d / "oracle.jsonl", "--out", d / "o.json") == 0
    rep = json.loads((d / "o.json").read_text())
    assert rep["recall_micro_3"] == rep["recall_macro_3"] == rep["dcg"] == 100.0
    assert "Rmicro(3)" in capsys.readouterr().out


def test_sweep_rows_match_individual_runs(ws):
    d, data = ws
    assert run("sweep", *data, "--train", d / "data/train.jsonl", "--dev", d / "data/dev.jsonl", *SMALL,
               "--cache", d / "cache.jsonl", "--no-baseline", "--soft-losses", "mse", "--alphas", 0.2,
               "--temperatures", 3, "--out", d / "sw1.json") == 0
    assert run("sweep", *data, "--train", d / "data/train.jsonl", "--dev", d / "data/dev.jsonl", *SMALL,
               "--cache", d / "cache.jsonl", "--no-baseline", "--soft-losses", "ce", "--alphas", 0.5,
               "--temperatures", 6, "--out", d / "sw2.json") == 0
    rows = json.loads((d / "sw1.json").read_text()) + json.loads((d / "sw2.json").read_text())
    for row, (loss, a, t) in zip(rows, [("mse", 0.2, 3), ("ce", 0.5, 6)]):
        out = d / f"ind_{loss}.ckpt"
        assert student(ws, out, "--alpha", a, "--temperature", t, "--soft-loss", loss,
                       "--cache", d / "cache.jsonl") == 0
        assert run("evaluate", "--sets", d / "data/dev.jsonl", "--model", out, *data, "--out", str(out) + ".json") == 0
        assert json.loads(Path(str(out) + ".json").read_text()) == row["report"]


def test_index_retrieve_benchmark_and_rerun(ws):
    d, data = ws
    assert student(ws, d / "s.ckpt") == 0
    assert run("index", "--student", d / "s.ckpt", "--corpus", d / "corpus.jsonl", "--out", d / "docs.idx") == 0
    assert run("retrieve", "--student", d / "s.ckpt", "--index", d / "docs.idx", "--corpus", d / "corpus.jsonl",
               "--claims", d / "claims.jsonl", "-k", 3, "--out", d / "hits.jsonl") == 0
    hits = [json.loads(l) for l in open(d / "hits.jsonl")]
    assert len(hits) == 30 and all(len(h["results"]) == 3 for h in hits)
    assert run("benchmark", *data, "--student", d / "s.ckpt", "--teacher", d / "teacher.ckpt", "--n-claims", 3,
               "--out", d / "bench.json") == 0
    ledger = json.loads((d / "bench.json").read_text())
    assert ledger["student_encoder_calls"] == 23 and ledger["teacher_joint_calls"] == 60
    manifest = json.loads((d / "bench.json.manifest.json").read_text())
    assert "timing" in manifest and "speedup" not in (d / "bench.json").read_text()
    for m in ("s.ckpt.manifest.json", "bench.json.manifest.json", "hits.jsonl.manifest.json"):
        assert run("rerun", d / m, "--check") == 0


def test_rerun_detects_drift(ws):
    d, _ = ws
    assert student(ws, d / "drift.ckpt") == 0
    m = json.loads((d / "drift.ckpt.manifest.json").read_text())
    m["outputs"][str(d / "drift.ckpt")] = "0" * 64
    (d / "bad.manifest.json").write_text(json.dumps(m))
    assert run("rerun", d / "bad.manifest.json", "--check") == 1


def test_exit_codes(ws, tmp_path, capsys):
    d, data = ws
    assert run("train-student", "--bogus") == 2
    assert student(ws, tmp_path / "x.ckpt", "--alpha", 0.5) == 1  # no cache given
    assert "CacheError" in capsys.readouterr().err
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 0.0, "nonsense": 1}))
    assert student(ws, tmp_path / "y.ckpt", "--config", cfg) == 2
    assert run("evaluate", "--sets", tmp_path / "missing.jsonl", "--scores", tmp_path / "m", "--out",
               tmp_path / "z.json") == 1
    assert run("index", "--student", d / "teacher.ckpt", "--corpus", d / "corpus.jsonl", "--out", tmp_path / "i") == 1


def test_config_file_then_flags(ws, tmp_path):
    d, _ = ws
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 0.0, "epochs": 1, "seed": 4}))
    assert student(ws, tmp_path / "a.ckpt", "--config", cfg, "--seed", 5) == 0
    m = json.loads((tmp_path / "a.ckpt.manifest.json").read_text())
    # SMALL sets --epochs 2, which beats the file's 1
    assert m["config"]["seed"] == 5 and m["config"]["epochs"] == 2 and m["config"]["alpha"] == 0.0
