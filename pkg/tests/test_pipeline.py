import csv
import io
import json

import numpy as np
import pytest

from admitfair.data import parse_csv
from admitfair.llm import LLM_FEATURE
from admitfair.pipeline import (FIGURE_FILES, FittedPipeline, PipelineConfig, PipelineError, bundle_files,
                                export_report, run_pipeline)
from admitfair.report_schema import validate_report
from admitfair.synthetic import SyntheticConfig, generate_synthetic

QUICK = {"models": ["LogisticRegression", "NaiveBayes"], "cv": {"k": 5, "train_fraction": 0.8}}


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_bundle_structure(bundle):
    assert set(bundle.cv_cleaned) == {"LogisticRegression", "NaiveBayes", "RandomForest", "NeuralNetwork",
                                      "StackedEnsemble"}
    assert set(bundle.cv_uncleaned) == set(bundle.cv_cleaned)
    assert bundle.selected_model in bundle.cv_cleaned
    assert len(bundle.fairness) >= 2
    assert bundle.rows == {"merged": 400, "cleaned": 361, "train": 289, "test": 72}
    assert bundle.cleaning_log.rows_after == 361
    assert bundle.feature_names[-1] == LLM_FEATURE
    assert "gender" not in bundle.feature_names


def test_selected_model_is_cv_argmax(bundle):
    best = max(r.accuracy for r in bundle.cv_cleaned.values())
    assert bundle.cv_cleaned[bundle.selected_model].accuracy == best


def test_branches_share_protocol(bundle):
    for kind, after in bundle.cv_cleaned.items():
        before = bundle.cv_uncleaned[kind]
        assert after.n == bundle.rows["train"]
        assert before.n == round(0.8 * bundle.rows["merged"])
        assert len(after.per_fold) == len(before.per_fold) == 10


def test_report_validates(bundle):
    validate_report(json.loads(bundle_files(bundle)["report.json"]))


def test_exported_manifest(bundle_dir):
    names = {p.name for p in bundle_dir.iterdir()}
    assert set(FIGURE_FILES) | {"report.json", "model.json"} <= names
    report = json.loads((bundle_dir / "report.json").read_text())
    assert all((bundle_dir / a).exists() for a in report["artifacts"])
    assert not [n for n in names if n.startswith(".staging")]


def test_model_json_round_trip(bundle, bundle_dir):
    fitted = FittedPipeline.load(bundle_dir / "model.json")
    preds = bundle.test_predictions
    table = generate_synthetic(SyntheticConfig(grad_rows=400, anomalies=39, noise_features=1), seed=7)
    test_rows = table.select_rows(list(preds["row_id"]))
    assert np.array_equal(fitted.predict_proba(test_rows), preds["y_score"].to_numpy())
    assert np.array_equal(fitted.predict(test_rows), preds["y_pred"].to_numpy())


def test_figure_tables(bundle, bundle_dir):
    before_after = _rows((bundle_dir / "accuracy_before_after.csv").read_text())
    assert [r["model"] for r in before_after] == list(bundle.cv_cleaned)
    assert set(before_after[0]) == {"model", "accuracy_before", "accuracy_after"}
    corr = _rows((bundle_dir / "correlation.csv").read_text())
    assert [r["feature"] for r in corr][-1] == "Admission_Status"
    assert float(corr[0][corr[0]["feature"]]) == 1.0
    groups = _rows((bundle_dir / "fairness_groups.csv").read_text())
    assert {r["attribute"] for r in groups} == {"gender", "parental_education"}
    assert {r["group"] for r in groups if r["attribute"] == "parental_education"} == {"high", "low"}
    importance = _rows((bundle_dir / "importance.csv").read_text())
    assert {r["method"] for r in importance} <= {"coefficient", "permutation"}
    accuracy = _rows((bundle_dir / "model_accuracy.csv").read_text())
    assert len(accuracy) == 5 and all(float(r["accuracy"]) >= 0.8 for r in accuracy)


def test_cleaning_improves_logistic_cv(bundle):
    assert bundle.cv_cleaned["LogisticRegression"].accuracy > bundle.cv_uncleaned["LogisticRegression"].accuracy


def test_fold_count_error_names_constraint(tmp_path):
    src = tmp_path / "tiny.csv"
    src.write_text("GRE,CGPA,admit_prob\n300,8,0.1\n310,8.5,0.9\n320,9,0.8\n305,8.1,0.2\n330,9.6,0.9\n")
    cfg = PipelineConfig.from_mapping({"seed": 1, "sources": [{"path": str(src)}], "sensitive": [],
                                       "cleaning": None, "cv": {"k": 10, "train_fraction": 0.8}})
    with pytest.raises(PipelineError, match="folds requested") as info:
        run_pipeline(cfg)
    assert info.value.stage.startswith("cv")


def test_llm_toggle_only_changes_feature_count():
    base = {"seed": 3, "synthetic": {"grad_rows": 150}, **QUICK}
    off = run_pipeline(PipelineConfig.from_mapping(base))
    on = run_pipeline(PipelineConfig.from_mapping({**base, "llm": {"enabled": True}}))
    assert on.feature_names == off.feature_names + [LLM_FEATURE]
    assert off.rows == on.rows
    assert list(off.test_predictions["row_id"]) == list(on.test_predictions["row_id"])
    again = run_pipeline(PipelineConfig.from_mapping({**base, "llm": {"enabled": True}}))
    assert bundle_files(again) == bundle_files(on)


def test_multi_source_merge_run():
    cfg = PipelineConfig.from_mapping({
        "seed": 5, "synthetic": {"grad_rows": 300, "hs_rows": 40, "ug_rows": 30, "missing_rate": 0.05},
        "cleaning": None, **QUICK})
    b = run_pipeline(cfg)
    assert b.rows["merged"] == 370
    assert b.cv_uncleaned is None and b.cleaning_log is None
    # source-specific columns are mostly empty after the union and fall to the 30% rule
    assert {"math_score", "SAT"} <= set(b.dropped_columns)
    assert {"GRE", "CGPA", "context=hs", "context=ug"} <= set(b.feature_names)
    validate_report(json.loads(bundle_files(b)["report.json"]))


def test_config_file_resolves_relative_sources(tmp_path):
    data = generate_synthetic(SyntheticConfig(grad_rows=100), seed=1)
    (tmp_path / "d").mkdir()
    (tmp_path / "d" / "grad.csv").write_text(data.to_csv())
    cfg_path = tmp_path / "cfg.yaml"
    cfg_path.write_text("seed: 2\nsources:\n  - {path: d/grad.csv, context: grad}\nmodels: [LogisticRegression]\n"
                        "cv: {k: 5}\n")
    cfg = PipelineConfig.from_file(cfg_path)
    assert cfg.sources[0]["path"] == str(tmp_path / "d" / "grad.csv")
    b = run_pipeline(cfg)
    assert b.selected_model == "LogisticRegression"
    assert b.explanations[0].method == "coefficient"


@pytest.mark.parametrize("bad", [{"seed": 1}, {"seed": 1, "synthetic": {}, "models": ["SVM"]},
                                 {"seed": 1, "synthetic": {}, "bogus": 1},
                                 {"seed": 1, "synthetic": {}, "cv": {"k": 1}}])
def test_config_validation(bad):
    with pytest.raises((ValueError, TypeError)):
        PipelineConfig.from_mapping(bad)


def test_export_to_unwritable_path(bundle, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(PipelineError, match="export"):
        export_report(bundle, blocker / "out")


def test_export_failure_leaves_no_partial_files(bundle, tmp_path, monkeypatch):
    from pathlib import Path

    real_replace = Path.replace
    calls = {"n": 0}

    def flaky(self, target):
        calls["n"] += 1
        if calls["n"] == 3:
            raise OSError("disk full")
        return real_replace(self, target)

    monkeypatch.setattr(Path, "replace", flaky)
    out = tmp_path / "out"
    with pytest.raises(PipelineError, match="disk full"):
        export_report(bundle, out)
    assert list(out.iterdir()) == []


def test_stage_tagged_load_error(tmp_path):
    cfg = PipelineConfig.from_mapping({"seed": 1, "sources": [{"path": str(tmp_path / "missing.csv")}]})
    with pytest.raises(PipelineError) as info:
        run_pipeline(cfg)
    assert info.value.stage == "load" and "[load]" in str(info.value)
