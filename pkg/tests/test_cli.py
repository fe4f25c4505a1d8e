import json
import subprocess
import sys

import pytest

from conceptkw.cli import run
from conceptkw.data import FIG2_QUERY


@pytest.fixture(scope="module")
def small_world(tmp_path_factory):
    out = tmp_path_factory.mktemp("world")
    assert run(["gen-world", "--out", str(out), "--n-entities", "80", "--n-templates", "8",
                "--n-pairs", "600", "--seed", "3"]) == 0
    return out


def kb_args(fig2):
    return ["--kb-dir", str(fig2 / "kb")]


def test_no_subcommand(capsys):
    assert run([]) == 1


def test_unknown_flag(capsys):
    assert run(["validate-kb", "--bogus"]) == 1


def test_missing_kb_dir(tmp_path, capsys):
    missing = tmp_path / "nope"
    assert run(["validate-kb", "--kb-dir", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_kb_dir_required(capsys):
    assert run(["validate-kb"]) == 1


def test_validate_kb(fig2, capsys):
    assert run(["validate-kb", *kb_args(fig2)]) == 0
    out = capsys.readouterr()
    assert "entities\t7" in out.out
    assert out.err.startswith("config: ")


def test_conceptualize(fig2, tmp_path, capsys):
    (tmp_path / "in.txt").write_text(FIG2_QUERY + "\n")
    assert run(["conceptualize", *kb_args(fig2), "--input", str(tmp_path / "in.txt")]) == 0
    assert "how much does [aesthetic_surgery] cost in [location]" in capsys.readouterr().out


def test_fig2_offline_pipeline(fig2, tmp_path, capsys):
    kb = kb_args(fig2)
    assert run(["build-corpus", *kb, "--pairs", str(fig2 / "paraphrases.tsv"),
                "--out", str(tmp_path / "pp.tsv")]) == 0
    assert (tmp_path / "pp.tsv").read_text() == (fig2 / "pattern-pairs.tsv").read_text()
    assert run(["train-translator", "--pairs", str(tmp_path / "pp.tsv"), "--out", str(tmp_path / "model")]) == 0
    for name in ("phrase-table.tsv", "lm.tsv"):
        assert (tmp_path / "model" / name).read_text() == (fig2 / "model" / name).read_text()
    assert run(["build-repo", *kb, "--keywords", str(fig2 / "keywords.txt"), "--k2k", str(fig2 / "k2k-pairs.tsv"),
                "--out", str(tmp_path / "patterns.txt")]) == 0
    assert len((tmp_path / "patterns.txt").read_text().splitlines()) == 2
    (tmp_path / "q.txt").write_text(FIG2_QUERY + "\n")
    assert run(["build-cache", *kb, "--model-dir", str(tmp_path / "model"), "--repo", str(fig2 / "keywords.txt"),
                "--queries", str(tmp_path / "q.txt"), "--out", str(tmp_path / "cache.tsv")]) == 0
    capsys.readouterr()
    assert run(["match", *kb, "--model-dir", str(tmp_path / "model"), "--repo", str(fig2 / "keywords.txt"),
                "--clusters", str(fig2 / "k2k-pairs.tsv"), "--cache", str(tmp_path / "cache.tsv"),
                "--query", FIG2_QUERY]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split("\t")[0] for line in lines] == [
        "the price of liposuction in new york", "the price of lipo in new york", "the price of liposuction in nyc"]
    assert [line.split("\t")[2] for line in lines] == ["join", "join", "expand"]


def test_match_golden_trace(fig2, tmp_path):
    assert run(["match", *kb_args(fig2), "--model-dir", str(fig2 / "model"), "--repo", str(fig2 / "keywords.txt"),
                "--clusters", str(fig2 / "k2k-pairs.tsv"), "--query", FIG2_QUERY, "--trace", "json",
                "--no-timing", "--output", str(tmp_path / "t.json")]) == 0
    assert (tmp_path / "t.json").read_bytes() == (fig2 / "golden-trace.json").read_bytes()


def test_match_batch(fig2, tmp_path, capsys):
    (tmp_path / "q.txt").write_text(FIG2_QUERY + "\ncheap flights\n")
    assert run(["match", *kb_args(fig2), "--model-dir", str(fig2 / "model"), "--repo", str(fig2 / "keywords.txt"),
                "--input", str(tmp_path / "q.txt")]) == 0
    rows = [line.split("\t") for line in capsys.readouterr().out.splitlines()]
    assert {r[0] for r in rows} == {FIG2_QUERY} and len(rows) == 2


def test_match_needs_query_or_input(fig2):
    assert run(["match", *kb_args(fig2), "--model-dir", str(fig2 / "model"),
                "--repo", str(fig2 / "keywords.txt")]) == 1


def test_discriminator_commands(small_world, tmp_path, capsys):
    kb = ["--kb-dir", str(small_world / "kb")]
    model = tmp_path / "m.json"
    assert run(["train-discriminator", *kb, "--pairs", str(small_world / "dis-train.tsv"),
                "--dev", str(small_world / "dis-dev.tsv"), "--precision", "0.95", "--precision", "0.7",
                "--epochs", "50", "--out", str(model)]) == 0
    err = capsys.readouterr().err
    assert "augmented=" in err and "threshold@0.95=" in err
    stored = json.loads(model.read_text())["thresholds"]
    assert set(stored) <= {"0.95", "0.7"} and stored
    target = next(iter(stored))
    assert run(["score", *kb, "--model", str(model), "--pairs", str(small_world / "dis-test.tsv"),
                "--precision", target]) == 0
    rows = [line.split("\t") for line in capsys.readouterr().out.splitlines()]
    assert len(rows) == 1000 and all(0 < float(r[2]) < 1 and r[3] in ("0", "1") for r in rows)
    assert run(["score", *kb, "--model", str(model), "--pairs", str(small_world / "dis-test.tsv"),
                "--precision", "0.5"]) == 2


def test_world_offline_pipeline(small_world, tmp_path, capsys):
    kb = ["--kb-dir", str(small_world / "kb")]
    assert run(["build-corpus", *kb, "--pairs", str(small_world / "paraphrases.tsv"),
                "--out", str(tmp_path / "pp.tsv")]) == 0
    assert run(["train-translator", "--pairs", str(tmp_path / "pp.tsv"), "--out", str(tmp_path / "model"),
                "--em-iters", "3"]) == 0
    assert run(["match", *kb, "--model-dir", str(tmp_path / "model"), "--repo", str(small_world / "keywords.txt"),
                "--clusters", str(small_world / "k2k-pairs.tsv"), "--input", str(small_world / "gen-test-queries.txt"),
                "--output", str(tmp_path / "out.tsv")]) == 0
    assert (tmp_path / "out.tsv").read_text().strip()


def test_evaluate(tmp_path, capsys):
    cfg = tmp_path / "eval.cfg"
    cfg.write_text("epochs = 50\nper_template = 1\nthroughput_queries = 10\nsweep = 0.12\n"
                   "n_entities = 60\nn_templates = 8\nn_pairs = 600\nn_keywords = 100\nn_k2k = 10\n"
                   "n_queries = 100\nn_dis_train = 200\nn_dis_dev = 50\nn_dis_test = 100\nn_longtail_test = 100\n")
    assert run(["evaluate", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    assert "# Evaluation report" in capsys.readouterr().out
    assert json.loads((tmp_path / "r" / "report.json").read_text())["config"]["epochs"] == 50


def test_gen_world_bad_option(tmp_path, capsys):
    assert run(["gen-world", "--out", str(tmp_path), "--n-entities", "0"]) == 2


def test_console_entry_point(fig2):
    r = subprocess.run([sys.executable, "-m", "conceptkw.cli", "validate-kb", "--kb-dir", str(fig2 / "kb")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "entities" in r.stdout
