"""Splitting, k-fold cross-validation, model selection and classification metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.stats import rankdata
from sklearn.base import clone

from ._random import substream
from .features import FeatureMatrix
from .models import make_model
from .splits import stratified_fold_ids, stratified_holdout_indices

logger = logging.getLogger(__name__)

# Tie-break order for equal CV accuracy, most preferred first.
SELECTION_PRECEDENCE = ("StackedEnsemble", "LogisticRegression", "NaiveBayes", "RandomForest", "NeuralNetwork")


@dataclass(frozen=True)
class CvConfig:
    k: int = 10
    train_fraction: float = 0.8
    seed: int = 0
    selection_metric: str = "accuracy"

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


@dataclass
class EvaluationReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auroc: float | None
    tp: int
    fp: int
    fn: int
    tn: int
    model: str | None = None
    dataset: str | None = None
    flags: list[str] = field(default_factory=list)
    per_fold: list["EvaluationReport"] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def confusion(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}

    def to_dict(self) -> dict:
        out = {
            "model": self.model, "dataset": self.dataset,
            "accuracy": self.accuracy, "precision": self.precision, "recall": self.recall,
            "f1": self.f1, "auroc": self.auroc, "confusion": self.confusion, "n": self.n,
            "flags": list(self.flags),
        }
        if self.per_fold:
            out["per_fold"] = [f.to_dict() for f in self.per_fold]
        return out

    @classmethod
    def from_dict(cls, d) -> "EvaluationReport":
        c = d["confusion"]
        return cls(d["accuracy"], d["precision"], d["recall"], d["f1"], d["auroc"],
                   c["tp"], c["fp"], c["fn"], c["tn"], d.get("model"), d.get("dataset"),
                   list(d.get("flags", [])), [cls.from_dict(f) for f in d.get("per_fold", [])])


def auroc(y_true, y_score) -> float | None:
    """Probability that a random positive outscores a random negative (ties count 1/2).

    Computed from average ranks (Mann-Whitney U). ``None`` when only one
    class is present.
    """
    y = np.asarray(y_true).astype(int)
    s = np.asarray(y_score, dtype=float)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _confusion_report(tp, fp, fn, tn, score=None, model=None, dataset=None) -> EvaluationReport:
    flags = []
    total = tp + fp + fn + tn
    if tp + fp == 0:
        flags.append("precision_undefined")
    if tp + fn == 0:
        flags.append("recall_undefined")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    if score is None:
        flags.append("auroc_undefined")
    return EvaluationReport((tp + tn) / total if total else 0.0, precision, recall, f1, score,
                            tp, fp, fn, tn, model, dataset, flags)


def compute_metrics(y_true, y_pred, y_score=None, model=None, dataset=None) -> EvaluationReport:
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    if len(y_true) != len(y_pred) or (y_score is not None and len(y_score) != len(y_true)):
        raise ValueError("y_true, y_pred and y_score must have equal lengths")
    tp = int(((y_true == 1) & (y_pred == 1)).sum())
    fp = int(((y_true == 0) & (y_pred == 1)).sum())
    fn = int(((y_true == 1) & (y_pred == 0)).sum())
    tn = int(((y_true == 0) & (y_pred == 0)).sum())
    score = auroc(y_true, y_score) if y_score is not None else None
    return _confusion_report(tp, fp, fn, tn, score, model, dataset)


def stratified_split(X: FeatureMatrix, train_fraction: float = 0.8, seed: int = 0):
    """Seeded stratified train/test split of a :class:`FeatureMatrix`."""
    train, test = stratified_holdout_indices(X.labels, 1.0 - train_fraction, substream(seed, "split"))
    return X.subset(train), X.subset(test)


def _estimator_factory(model_spec, seed) -> Callable:
    if isinstance(model_spec, str):
        return lambda: make_model(model_spec, seed)
    if callable(model_spec) and not hasattr(model_spec, "fit"):
        return model_spec
    return lambda: clone(model_spec)


def _kind_of(model_spec) -> str | None:
    if isinstance(model_spec, str):
        return model_spec
    est = model_spec() if callable(model_spec) and not hasattr(model_spec, "fit") else model_spec
    est = est.steps[-1][1] if hasattr(est, "steps") else est
    return getattr(est, "kind", type(est).__name__)


def fold_assignments(labels, config: CvConfig) -> np.ndarray:
    return stratified_fold_ids(labels, config.k, substream(config.seed, "cv"))


def kfold_cv(X: FeatureMatrix, model_spec, config: CvConfig = CvConfig(), dataset: str | None = None):
    """Stratified k-fold CV; returns ``(per_fold_reports, summary_report)``.

    ``model_spec`` is a model kind name, an unfitted estimator (cloned per
    fold) or a zero-argument factory. Scaling lives inside the estimator,
    so it is refit on each fold's training part. The summary pools the
    confusion counts over folds and averages the per-fold AUROC.
    """
    fold = fold_assignments(X.labels, config)
    factory = _estimator_factory(model_spec, config.seed)
    kind = _kind_of(model_spec)
    frame = X.to_frame()
    reports = []
    for f in range(config.k):
        train, val = fold != f, fold == f
        model = factory().fit(frame[train], X.labels[train])
        score = model.predict_proba(frame[val])[:, 1]
        reports.append(compute_metrics(X.labels[val], (score >= 0.5).astype(int), score, kind, dataset))
    tp = sum(r.tp for r in reports)
    fp = sum(r.fp for r in reports)
    fn = sum(r.fn for r in reports)
    tn = sum(r.tn for r in reports)
    aucs = [r.auroc for r in reports if r.auroc is not None]
    summary = _confusion_report(tp, fp, fn, tn, float(np.mean(aucs)) if aucs else None, kind, dataset)
    summary.per_fold = reports
    logger.info("cv %s on %s: accuracy %.4f", kind, dataset, summary.accuracy)
    return reports, summary


def select_best(results: Mapping[str, object]) -> str:
    """Model kind with the highest CV accuracy; ties follow ``SELECTION_PRECEDENCE``.

    Values may be accuracies or :class:`EvaluationReport` summaries.
    """
    if not results:
        raise ValueError("select_best needs at least one result")

    def accuracy(v):
        return v.accuracy if isinstance(v, EvaluationReport) else float(v)

    def precedence(kind):
        return SELECTION_PRECEDENCE.index(kind) if kind in SELECTION_PRECEDENCE else len(SELECTION_PRECEDENCE)

    return min(results, key=lambda k: (-accuracy(results[k]), precedence(k), k))
