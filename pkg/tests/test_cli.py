import json
import math
from pathlib import Path

import pytest
from click.testing import CliRunner

from ifdkit.cli import main
from ifdkit.scoring import read_scores


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def dataset_file(tmp_path) -> Path:
    records = [
        {"instruction": "Write a story about a cat", "input": "", "output": "a long tale of cats"},
        {"instruction": "Add numbers", "input": "2,2", "output": "four exactly"},
        {"instruction": "Rewrite the sentence", "input": "", "output": "the sentence rewritten"},
        {"instruction": "Generate a list", "input": "", "output": "one two three"},
    ]
    path = tmp_path / "data.json"
    path.write_text(json.dumps(records), encoding="utf-8")
    return path


@pytest.fixture
def table_file(tmp_path) -> Path:
    ln = math.log
    spec = {
        "name": "crafted",
        "default": ln(0.25),
        "entries": {"": {"a": ln(0.5), "four": ln(0.125), "the": ln(0.5), "one": ln(0.4)}},
    }
    path = tmp_path / "table.json"
    path.write_text(json.dumps(spec), encoding="utf-8")
    return path


def run_score(runner, dataset_file, tmp_path, backend="uniform:50257", extra=()):
    out = tmp_path / "scores.jsonl"
    result = runner.invoke(main, [
        "score", "--dataset", str(dataset_file), "--backend", backend,
        "--template", "bare", "--out", str(out), *extra,
    ])
    assert result.exit_code == 0, result.output
    return out, result


class TestScoreCommand:
    def test_uniform_backend_writes_all_ifd_one(self, runner, dataset_file, tmp_path):
        out, result = run_score(runner, dataset_file, tmp_path)
        meta, rows = read_scores(out)
        assert len(rows) == 4
        assert all(abs(r.ifd - 1.0) <= 1e-9 for r in rows)
        assert meta["backend"] == "uniform:50257"
        assert "samples/s" in result.output
        assert (tmp_path / "scores.jsonl.manifest.json").exists()

    def test_table_backend(self, runner, dataset_file, table_file, tmp_path):
        out, _ = run_score(runner, dataset_file, tmp_path, backend=f"table:{table_file}")
        _, rows = read_scores(out)
        assert len(rows) == 4
        assert rows[0].scorer == "crafted"

    def test_bad_backend_spec_exits_2(self, runner, dataset_file, tmp_path):
        result = runner.invoke(main, [
            "score", "--dataset", str(dataset_file), "--backend", "nope",
            "--out", str(tmp_path / "s.jsonl"),
        ])
        assert result.exit_code == 2

    def test_invalid_dataset_exits_4(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps([{"instruction": "x", "output": "  "}]), encoding="utf-8")
        result = runner.invoke(main, [
            "score", "--dataset", str(bad), "--backend", "uniform:4",
            "--out", str(tmp_path / "s.jsonl"),
        ])
        assert result.exit_code == 4

    def test_unreachable_remote_exits_3(self, runner, dataset_file, tmp_path):
        result = runner.invoke(main, [
            "score", "--dataset", str(dataset_file),
            "--backend", "remote:http://127.0.0.1:1", "--timeout", "0.2",
            "--out", str(tmp_path / "s.jsonl"),
        ])
        assert result.exit_code == 3


class TestSelectCommand:
    def test_select_writes_subset(self, runner, dataset_file, table_file, tmp_path):
        scores, _ = run_score(runner, dataset_file, tmp_path, backend=f"table:{table_file}")
        out = tmp_path / "subset.json"
        result = runner.invoke(main, [
            "select", "--dataset", str(dataset_file), "--scores", str(scores),
            "--ratio", "0.5", "--ifd-cap", "inf", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        subset = json.loads(out.read_text())
        assert len(subset) == 2
        assert set(subset[0]) == {"instruction", "input", "output"}

    def test_identity_subset_with_cap_disabled(self, runner, dataset_file, tmp_path):
        scores, _ = run_score(runner, dataset_file, tmp_path)
        out = tmp_path / "subset.json"
        result = runner.invoke(main, [
            "select", "--dataset", str(dataset_file), "--scores", str(scores),
            "--ratio", "1.0", "--ifd-cap", "inf", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        assert len(json.loads(out.read_text())) == 4

    def test_zero_budget_exits_2(self, runner, dataset_file, tmp_path):
        scores, _ = run_score(runner, dataset_file, tmp_path)
        result = runner.invoke(main, [
            "select", "--dataset", str(dataset_file), "--scores", str(scores),
            "--ratio", "0.01", "--out", str(tmp_path / "x.json"),
        ])
        assert result.exit_code == 2

    def test_nested_ratios_nested_subsets(self, runner, dataset_file, table_file, tmp_path):
        scores, _ = run_score(runner, dataset_file, tmp_path, backend=f"table:{table_file}")
        subsets = {}
        for ratio in ("0.5", "1.0"):
            out = tmp_path / f"subset-{ratio}.jsonl"
            result = runner.invoke(main, [
                "select", "--dataset", str(dataset_file), "--scores", str(scores),
                "--ratio", ratio, "--ifd-cap", "inf",
                "--output-format", "jsonl", "--out", str(out),
            ])
            assert result.exit_code == 0, result.output
            subsets[ratio] = {json.loads(l)["id"] for l in out.read_text().splitlines()}
        assert subsets["0.5"] <= subsets["1.0"]


class TestCompareCommand:
    def test_self_comparison(self, runner, dataset_file, table_file, tmp_path):
        scores, _ = run_score(runner, dataset_file, tmp_path, backend=f"table:{table_file}")
        out = tmp_path / "report.json"
        result = runner.invoke(main, [
            "compare", "--scores-a", str(scores), "--scores-b", str(scores),
            "--budgets", "0.5,1.0", "--ifd-cap", "inf", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert report["spearman_ifd"] == 1.0
        assert report["overlap"] == {"0.5": 1.0, "1": 1.0}

    def test_degenerate_reported(self, runner, dataset_file, tmp_path):
        s1, _ = run_score(runner, dataset_file, tmp_path, backend="uniform:10")
        s2 = tmp_path / "scores2.jsonl"
        result = runner.invoke(main, [
            "score", "--dataset", str(dataset_file), "--backend", "uniform:20",
            "--template", "bare", "--out", str(s2),
        ])
        assert result.exit_code == 0
        out = tmp_path / "report.json"
        result = runner.invoke(main, [
            "compare", "--scores-a", str(s1), "--scores-b", str(s2),
            "--budgets", "1.0", "--ifd-cap", "inf", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        assert "degenerate" in result.output
        assert json.loads(out.read_text())["spearman_ifd"] is None


class TestDiversifyCommand:
    def test_two_stage_run(self, runner, dataset_file, table_file, tmp_path):
        scores, _ = run_score(runner, dataset_file, tmp_path, backend=f"table:{table_file}")
        out = tmp_path / "diverse.json"
        emb_out = tmp_path / "emb.bin"
        result = runner.invoke(main, [
            "diversify", "--dataset", str(dataset_file), "--scores", str(scores),
            "--pre-ratio", "0.75", "--final-ratio", "0.5", "--ifd-cap", "inf",
            "--embedder", "hashed-bow:64", "--save-embeddings", str(emb_out),
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        assert len(json.loads(out.read_text())) == 2
        from ifdkit.diversity import load_embeddings

        cached = load_embeddings(emb_out)
        assert cached.dim == 64
        assert len(cached.ids) == 3    # stage-1 pool

    def test_bad_ratios_exit_2(self, runner, dataset_file, table_file, tmp_path):
        scores, _ = run_score(runner, dataset_file, tmp_path, backend=f"table:{table_file}")
        result = runner.invoke(main, [
            "diversify", "--dataset", str(dataset_file), "--scores", str(scores),
            "--pre-ratio", "0.5", "--final-ratio", "0.5",
            "--out", str(tmp_path / "x.json"),
        ])
        assert result.exit_code == 2


class TestReportCommand:
    def test_report_outputs(self, runner, dataset_file, table_file, tmp_path):
        scores, _ = run_score(runner, dataset_file, tmp_path, backend=f"table:{table_file}")
        out_dir = tmp_path / "report"
        result = runner.invoke(main, [
            "report", "--dataset", str(dataset_file), "--scores", str(scores),
            "--fraction", "0.25", "--out-dir", str(out_dir),
        ])
        assert result.exit_code == 0, result.output
        for name in ("report.json", "report.txt", "quantiles.csv",
                     "verb_noun_top.csv", "verb_noun_bottom.csv",
                     "report.json.manifest.json"):
            assert (out_dir / name).exists(), name
        csv_lines = (out_dir / "quantiles.csv").read_text().splitlines()
        assert csv_lines[0] == "scorer,metric,percentile,value"
        assert len(csv_lines) == 1 + 2 * 7   # two metrics, seven percentiles

    def test_degenerate_warning(self, runner, dataset_file, tmp_path):
        scores, _ = run_score(runner, dataset_file, tmp_path)
        result = runner.invoke(main, [
            "report", "--dataset", str(dataset_file), "--scores", str(scores),
            "--out-dir", str(tmp_path / "rep"),
        ])
        assert result.exit_code == 0, result.output
        assert "degenerate" in result.output.lower() or "WARNING" in result.output


class TestConfigFile:
    def test_config_provides_defaults_flags_override(self, runner, dataset_file, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"template": "bare", "workers": 2}), encoding="utf-8")
        out = tmp_path / "scores.jsonl"
        result = runner.invoke(main, [
            "--config", str(cfg),
            "score", "--dataset", str(dataset_file), "--backend", "uniform:7",
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        meta, _ = read_scores(out)
        assert meta["template"] == "bare"

    def test_unknown_config_key_exits_2(self, runner, dataset_file, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"no_such_key": 1}), encoding="utf-8")
        result = runner.invoke(main, [
            "--config", str(cfg),
            "score", "--dataset", str(dataset_file), "--backend", "uniform:7",
            "--out", str(tmp_path / "s.jsonl"),
        ])
        assert result.exit_code == 2
