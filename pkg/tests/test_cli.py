from __future__ import annotations

import json
from pathlib import Path

import pytest

from pipeline import data_files, llm_report, mock_pipeline, run

GOLDEN = Path(__file__).parent / "golden"


def test_gen_prompts_golden_first_line(tmp_path):
    assert run("gen-prompts", "--input", GOLDEN / "example.csv", "--out", tmp_path / "corpus.jsonl") == 0
    first = json.loads((tmp_path / "corpus.jsonl").read_text(encoding="utf-8").splitlines()[0])
    assert first["prompt"] == (GOLDEN / "example_prompt.txt").read_text(encoding="utf-8")
    assert first["completion"] == (GOLDEN / "example_completion.txt").read_text(encoding="utf-8")
    manifest = json.loads((tmp_path / "manifest-gen-prompts.json").read_text())
    assert manifest["subcommand"] == "gen-prompts"
    assert str(tmp_path / "corpus.jsonl") in manifest["outputs"]
    assert manifest["config_digest"].startswith("sha256:")


def test_mock_pipeline_oracle_closure(tmp_path, isbsg_csv, api_key):
    paths = mock_pipeline(isbsg_csv, tmp_path / "run")
    llm = llm_report(paths)
    assert llm["mae"] == 0.0 and llm["rmse"] == 0.0 and llm["excluded"] == 0
    assert (tmp_path / "run" / "report" / "report.md").is_file()


def test_inputs_are_not_mutated(tmp_path, isbsg_csv, api_key):
    before = isbsg_csv.read_bytes()
    mock_pipeline(isbsg_csv, tmp_path / "run")
    assert isbsg_csv.read_bytes() == before


def test_evaluate_baselines_on_dataset(tmp_path, desharnais_csv):
    code = run("evaluate", "--schema", "desharnais", "--target-column", "Effort", "--id-column", "Project",
               "--provenance", "desharnais", "--dataset", desharnais_csv, "--estimators", "knn,linreg,svm",
               "--seed", "7", "--out", tmp_path)
    assert code == 0
    lines = (tmp_path / "metrics.csv").read_text().splitlines()
    assert lines[0] == "estimator,dataset,n,mae,rmse,seed,excluded"
    assert [l.split(",")[0] for l in lines[1:]] == ["KNN Regression", "Linear Regression", "Support Vector Machine"]
    assert "1755.11" in (tmp_path / "comparison.md").read_text()


def test_usage_errors_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as ei:
        run("split", "--input", tmp_path / "missing.csv", "--out", tmp_path)
    assert ei.value.code == 2
    assert "--input" in capsys.readouterr().err
    with pytest.raises(SystemExit) as ei:
        run("evaluate", "--estimators", "knn,bogus", "--out", tmp_path)
    assert ei.value.code == 2


def test_domain_error_exits_1_and_cites_module(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,Architecture\n1,x\n", encoding="utf-8")
    assert run("ingest", "--input", bad, "--out", tmp_path / "o") == 1
    assert "[dataset]" in capsys.readouterr().err


def test_pinned_split_flags(tmp_path, isbsg_csv):
    code = run("split", "--input", isbsg_csv, "--out", tmp_path, "--train", "0.5", "--val", "0", "--test", "0.5",
               "--pin-max-missing", "0", "--pin-train-frac", "0.5", "--seed", "1")
    assert code == 0
    info = json.loads((tmp_path / "split.json").read_text())
    assert info["sizes"]["pinned_tier"] == {"train": 5, "val": 0, "test": 5}


def test_predict_needs_model(tmp_path, isbsg_csv):
    assert run("predict", "--input", isbsg_csv, "--out", tmp_path) == 1


def test_determinism_of_a_rerun(tmp_path, isbsg_csv, api_key):
    mock_pipeline(isbsg_csv, tmp_path / "a")
    mock_pipeline(isbsg_csv, tmp_path / "b")
    assert data_files(tmp_path / "a") == data_files(tmp_path / "b")
