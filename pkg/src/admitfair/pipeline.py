"""End-to-end run: merge, clean, engineer, augment, select, explain, audit, test, export."""

from __future__ import annotations

import contextlib
import copy
import csv
import io
import json
import logging
import shutil
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import yaml

from . import __version__
from .data import CleaningLog, CleaningRule, DataTable, clean_anomalies, drop_high_missingness, impute, merge_outer, parse_csv
from .evaluation import CvConfig, EvaluationReport, compute_metrics, kfold_cv, select_best, stratified_split
from .explain import Explanation, coefficient_importance, permutation_importance
from .fairness import DEFAULT_TAU, PARENTAL_EDUCATION_GROUPS, FairnessReport, SensitiveAttribute, audit
from .features import FeatureMatrix, TableVectorizer, ZScoreScaler, correlation_matrix
from .llm import LLM_FEATURE, MockScorer, RemoteScorer, ScoreCache, StatementTemplate, augment_features, score_table
from .models import MODEL_KINDS, make_model, model_from_dict, model_to_dict
from .synthetic import SyntheticConfig, generate_sources

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = "1.0"
PIPELINE_FORMAT = "admitfair-pipeline"
ALL_MODELS = ("LogisticRegression", "NaiveBayes", "RandomForest", "NeuralNetwork", "StackedEnsemble")
LABEL_DISPLAY = "Admission_Status"
FIGURE_FILES = ("correlation.csv", "accuracy_before_after.csv", "importance.csv",
                "fairness_groups.csv", "model_accuracy.csv")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, str(exc)) from exc


@dataclass
class PipelineConfig:
    seed: int = 0
    sources: list[dict] = field(default_factory=list)
    synthetic: dict | None = None
    label: str = "admit_prob"
    label_threshold: float = 0.5
    sensitive: list[str] = field(default_factory=lambda: ["gender", "parental_education"])
    group_maps: dict = field(default_factory=lambda: {"parental_education": dict(PARENTAL_EDUCATION_GROUPS)})
    exclude: list[str] = field(default_factory=list)
    missing_threshold: float = 0.30
    cleaning: dict | None = field(default_factory=dict)
    models: list[str] = field(default_factory=lambda: list(ALL_MODELS))
    model_params: dict = field(default_factory=dict)
    cv: dict = field(default_factory=lambda: {"k": 10, "train_fraction": 0.8})
    tau: float = DEFAULT_TAU
    llm: dict = field(default_factory=lambda: {"enabled": False, "scorer": "mock"})
    permutation_repeats: int = 10
    output_dir: str | None = None

    def validate(self) -> None:
        if self.seed is None:
            raise ValueError("config needs a seed")
        if not self.sources and self.synthetic is None:
            raise ValueError("config needs at least one data source (sources or synthetic)")
        unknown = [m for m in self.models if m not in MODEL_KINDS]
        if unknown:
            raise ValueError(f"unknown model kinds {unknown}")
        if not self.models:
            raise ValueError("config lists no models")
        self.cv_config()

    def cv_config(self) -> CvConfig:
        return CvConfig(k=int(self.cv.get("k", 10)), train_fraction=float(self.cv.get("train_fraction", 0.8)),
                        seed=int(self.seed))

    def cleaning_rule(self) -> CleaningRule | None:
        if self.cleaning is None:
            return None
        params = {"label": self.label, "label_threshold": self.label_threshold, **self.cleaning}
        return CleaningRule(**params)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "PipelineConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**copy.deepcopy(mapping))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        base = Path(path).parent
        for src in data.get("sources", []) or []:
            if "path" in src and not Path(src["path"]).is_absolute():
                src["path"] = str(base / src["path"])
        return cls.from_mapping(data)

    def to_dict(self) -> dict:
        return asdict(self)


class FittedPipeline:
    """Preprocessing plus the selected classifier, loadable from ``model.json``."""

    def __init__(self, vectorizer: TableVectorizer, estimator, llm_reference=None,
                 template: StatementTemplate | None = None):
        self.vectorizer = vectorizer
        self.estimator = estimator
        self.llm_reference = llm_reference
        self.template = template

    def features(self, table: DataTable) -> FeatureMatrix:
        fm = self.vectorizer.transform(table)
        if self.llm_reference is not None:
            scorer = MockScorer(self.llm_reference)
            _, scores = score_table(table, scorer, self.template or StatementTemplate())
            fm = augment_features(fm, scores)
        return fm

    def predict_proba(self, table_or_matrix) -> np.ndarray:
        fm = table_or_matrix if isinstance(table_or_matrix, FeatureMatrix) else self.features(table_or_matrix)
        return self.estimator.predict_proba(fm.to_frame())[:, 1]

    def predict(self, table_or_matrix, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(table_or_matrix) >= threshold).astype(int)

    def to_dict(self) -> dict:
        scaler, clf = self.estimator.steps[0][1], self.estimator.steps[-1][1]
        return {
            "format": PIPELINE_FORMAT,
            "version": 1,
            "package_version": __version__,
            "vectorizer": self.vectorizer.to_dict(),
            "llm": None if self.llm_reference is None else {
                "scorer": MockScorer.scorer_id,
                "reference": {k: list(v) for k, v in self.llm_reference.items()},
                "template": (self.template or StatementTemplate()).text,
            },
            "feature_names": [str(n) for n in scaler.feature_names_in_],
            "scaler": scaler.to_dict(),
            "model": model_to_dict(clf),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedPipeline":
        from sklearn.pipeline import Pipeline

        if d.get("format") != PIPELINE_FORMAT:
            raise ValueError("not a serialized admitfair pipeline")
        scaler = ZScoreScaler.from_dict(d["scaler"])
        scaler.feature_names_in_ = np.asarray(d["feature_names"], dtype=object)
        estimator = Pipeline([("scale", scaler), ("model", model_from_dict(d["model"]))])
        llm = d.get("llm")
        return cls(TableVectorizer.from_dict(d["vectorizer"]), estimator,
                   None if llm is None else {k: tuple(v) for k, v in llm["reference"].items()},
                   None if llm is None else StatementTemplate(llm["template"]))

    @classmethod
    def load(cls, path) -> "FittedPipeline":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class BranchResult:
    table: DataTable
    matrix: FeatureMatrix
    train: FeatureMatrix
    test: FeatureMatrix
    cv: dict[str, EvaluationReport]


@dataclass
class RunBundle:
    config: PipelineConfig
    sources: list[dict]
    dropped_columns: list[str]
    cleaning_log: CleaningLog | None
    feature_names: list[str]
    cv_cleaned: dict[str, EvaluationReport]
    cv_uncleaned: dict[str, EvaluationReport] | None
    selected_model: str
    test_report: EvaluationReport
    fairness: list[FairnessReport]
    explanations: list[Explanation]
    correlation: pd.DataFrame
    fitted: FittedPipeline
    test_predictions: pd.DataFrame
    llm: dict[str, Any]
    rows: dict[str, int]

    def report_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "package_version": __version__,
            "seed": self.config.seed,
            # where the bundle lands is not part of the run, so two exports compare equal
            "config": {k: v for k, v in self.config.to_dict().items() if k != "output_dir"},
            "data": {
                "sources": self.sources,
                "rows": self.rows,
                "dropped_columns": self.dropped_columns,
                "cleaning": None if self.cleaning_log is None else self.cleaning_log.to_dict(),
                "feature_names": self.feature_names,
            },
            "cv": {
                "cleaned": {k: v.to_dict() for k, v in self.cv_cleaned.items()},
                "uncleaned": None if self.cv_uncleaned is None
                else {k: v.to_dict() for k, v in self.cv_uncleaned.items()},
            },
            "selected_model": self.selected_model,
            "test": self.test_report.to_dict(),
            "fairness": [f.to_dict() for f in self.fairness],
            "explanations": [e.to_dict() for e in self.explanations],
            "llm": self.llm,
            "artifacts": ["report.json", "model.json", *FIGURE_FILES, "predictions.csv", "cleaning_log.json"],
        }


def load_sources(config: PipelineConfig) -> list[tuple[DataTable, str]]:
    if config.sources:
        out = []
        for src in config.sources:
            table = parse_csv(src["path"], src.get("schema"))
            if src.get("rename"):
                table = table.rename(src["rename"])
            out.append((table, src.get("context", Path(src["path"]).stem)))
        return out
    syn = SyntheticConfig.from_mapping(config.synthetic or {})
    return [(t, flag) for flag, t in generate_sources(syn, config.seed).items()]


def _prepare_table(config, tables):
    merged = merge_outer(tables)
    exempt = [config.label, *config.sensitive]
    trimmed, dropped = drop_high_missingness(merged, config.missing_threshold, exempt=exempt)
    return impute(trimmed), dropped


def _vectorizer(config, table):
    exclude = list(config.exclude)
    if "context" in table.kinds and table.column("context").nunique() < 2:
        exclude.append("context")
    sensitive = [s for s in config.sensitive if s in table.kinds]
    return TableVectorizer(config.label, tuple(sensitive), config.label_threshold, tuple(exclude)).fit(table)


def _llm_scores(config, table, fm):
    settings = config.llm or {}
    if not settings.get("enabled"):
        return fm, None, None
    template = StatementTemplate(settings.get("template", StatementTemplate().text))
    cache = ScoreCache(settings["cache_dir"]) if settings.get("cache_dir") else None
    if settings.get("scorer", "mock") == "mock":
        scorer = MockScorer.fit(table)
    else:
        scorer = RemoteScorer.from_env(**{k: settings[k] for k in ("url", "timeout", "rubric") if k in settings})
    _, scores = score_table(table, scorer, template, cache, int(settings.get("max_workers", 1)))
    return augment_features(fm, scores), scorer, template


def _model_factory(config, kind):
    params = dict(config.model_params.get(kind, {}))
    return lambda: make_model(kind, config.seed, **params)


def _run_branch(config, table, vectorizer, tag) -> BranchResult:
    fm = vectorizer.transform(table)
    with stage(f"augment[{tag}]"):
        fm, _, _ = _llm_scores(config, table, fm)
    cv_cfg = config.cv_config()
    with stage(f"split[{tag}]"):
        train, test = stratified_split(fm, cv_cfg.train_fraction, config.seed)
    results = {}
    for kind in config.models:
        with stage(f"cv[{tag}:{kind}]"):
            _, summary = kfold_cv(train, _model_factory(config, kind), cv_cfg, dataset=tag)
            results[kind] = summary
    return BranchResult(table, fm, train, test, results)


def run_pipeline(config: PipelineConfig) -> RunBundle:
    """Execute every stage in memory and return the bundle (nothing is written)."""
    config.validate()
    with stage("load"):
        tables = load_sources(config)
    with stage("merge"):
        table, dropped = _prepare_table(config, tables)
    rule = config.cleaning_rule()
    log = None
    raw_table = table
    if rule is not None:
        with stage("clean"):
            table, log = clean_anomalies(table, rule)
    with stage("features"):
        vectorizer = _vectorizer(config, table)

    cleaned = _run_branch(config, table, vectorizer, "cleaned")
    uncleaned = None
    if rule is not None:
        uncleaned = _run_branch(config, raw_table, vectorizer, "uncleaned")

    with stage("select"):
        best = select_best(cleaned.cv)

    with stage("retrain"):
        frame = cleaned.train.to_frame()
        estimator = _model_factory(config, best)().fit(frame, cleaned.train.labels)

    with stage("explain"):
        explanations = []
        if best == "LogisticRegression":
            explanations.append(coefficient_importance(estimator))
        else:
            explanations.append(permutation_importance(
                estimator, cleaned.test.to_frame(), cleaned.test.labels,
                config.permutation_repeats, config.seed))
            if "LogisticRegression" in config.models:
                lr = _model_factory(config, "LogisticRegression")().fit(frame, cleaned.train.labels)
                explanations.append(coefficient_importance(lr))

    with stage("test"):
        test_frame = cleaned.test.to_frame()
        score = estimator.predict_proba(test_frame)[:, 1]
        pred = (score >= 0.5).astype(int)
        test_report = compute_metrics(cleaned.test.labels, pred, score, best, "cleaned")

    with stage("audit"):
        attributes = [SensitiveAttribute.from_column(name, cleaned.test.sensitive[name], config.group_maps.get(name))
                      for name in config.sensitive if name in cleaned.test.sensitive]
        fairness = audit(pred, cleaned.test.labels, attributes, config.tau)

    with stage("correlation"):
        corr = correlation_matrix(np.column_stack([cleaned.matrix.values, cleaned.matrix.labels]),
                                  cleaned.matrix.feature_names + [LABEL_DISPLAY])

    llm_settings = config.llm or {}
    reference = None
    template = None
    if llm_settings.get("enabled"):
        if llm_settings.get("scorer", "mock") != "mock":
            logger.warning("exported model.json re-scores new rows with the mock scorer only")
        reference = MockScorer.fit(table).reference
        template = StatementTemplate(llm_settings.get("template", StatementTemplate().text))
    fitted = FittedPipeline(vectorizer, estimator, reference, template)

    predictions = pd.DataFrame({"row_id": cleaned.test.row_ids, "y_true": cleaned.test.labels,
                                "y_score": score, "y_pred": pred})
    for name, values in cleaned.test.sensitive.items():
        predictions[name] = values

    return RunBundle(
        config=config,
        sources=[{"context": flag, "rows": len(t), "columns": t.columns} for t, flag in tables],
        dropped_columns=dropped,
        cleaning_log=log,
        feature_names=list(cleaned.matrix.feature_names),
        cv_cleaned=cleaned.cv,
        cv_uncleaned=None if uncleaned is None else uncleaned.cv,
        selected_model=best,
        test_report=test_report,
        fairness=fairness,
        explanations=explanations,
        correlation=corr,
        fitted=fitted,
        test_predictions=predictions,
        llm={"enabled": bool(llm_settings.get("enabled")),
             "scorer": llm_settings.get("scorer", "mock") if llm_settings.get("enabled") else None,
             "feature": LLM_FEATURE if llm_settings.get("enabled") else None},
        rows={"merged": len(raw_table), "cleaned": len(table), "train": len(cleaned.train),
              "test": len(cleaned.test)},
    )


def _csv(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _num(x):
    return "" if x is None else repr(float(x))


def figure_tables(bundle: RunBundle) -> dict[str, str]:
    """The CSV payloads behind the report figures, keyed by file name."""
    corr = bundle.correlation
    corr_rows = [[name, *(_num(v) for v in corr.loc[name])] for name in corr.index]
    before = bundle.cv_uncleaned or {}
    before_after = [[k, _num(before[k].accuracy) if k in before else "", _num(v.accuracy)]
                    for k, v in bundle.cv_cleaned.items()]
    importance = [[e.method, entry.feature, _num(entry.importance), entry.rank, _num(entry.signed)]
                  for e in bundle.explanations for entry in e.entries]
    groups = [[f.attribute, g.label, _num(g.positive_rate), _num(g.base_rate), _num(g.tpr), _num(g.fpr), g.support]
              for f in bundle.fairness for g in f.groups]
    accuracy = [[k, _num(v.accuracy), f"{100 * v.accuracy:.1f}"] for k, v in bundle.cv_cleaned.items()]
    return {
        "correlation.csv": _csv(corr_rows, ["feature", *corr.columns]),
        "accuracy_before_after.csv": _csv(before_after, ["model", "accuracy_before", "accuracy_after"]),
        "importance.csv": _csv(importance, ["method", "feature", "importance", "rank", "signed"]),
        "fairness_groups.csv": _csv(groups, ["attribute", "group", "positive_rate", "base_rate", "tpr", "fpr",
                                             "support"]),
        "model_accuracy.csv": _csv(accuracy, ["model", "accuracy", "accuracy_pct"]),
    }


def bundle_files(bundle: RunBundle) -> dict[str, str]:
    files = {
        "report.json": json.dumps(bundle.report_dict(), indent=2, sort_keys=True) + "\n",
        "model.json": json.dumps(bundle.fitted.to_dict(), sort_keys=True) + "\n",
        "predictions.csv": bundle.test_predictions.to_csv(index=False, float_format=repr, lineterminator="\n"),
        "cleaning_log.json": (bundle.cleaning_log.to_json() if bundle.cleaning_log else "null") + "\n",
    }
    files.update(figure_tables(bundle))
    return files


def export_report(bundle: RunBundle, out_dir) -> list[Path]:
    """Write the bundle under ``out_dir``; on failure no partial files are left behind."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PipelineError("export", f"cannot create {out}: {exc}") from exc
    files = bundle_files(bundle)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    written = []
    try:
        for name, text in files.items():
            (staging / name).write_text(text)
        for name in files:
            target = out / name
            (staging / name).replace(target)
            written.append(target)
    except OSError as exc:
        for path in written:
            path.unlink(missing_ok=True)
        raise PipelineError("export", str(exc)) from exc
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return written
