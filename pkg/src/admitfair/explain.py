"""Feature importance: logistic coefficients and permutation importance."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ._random import substream
from .models import LogisticRegressionGD

COEFFICIENT = "coefficient"
PERMUTATION = "permutation"


@dataclass
class ImportanceEntry:
    feature: str
    importance: float
    rank: int
    signed: float | None = None


@dataclass
class Explanation:
    method: str
    entries: list[ImportanceEntry]
    repeats: int | None = None
    seed: int | None = None
    metric: str | None = None
    baseline: float | None = None

    def ranking(self) -> list[str]:
        return [e.feature for e in self.entries]

    def importance_of(self, feature: str) -> float:
        for e in self.entries:
            if e.feature == feature:
                return e.importance
        raise KeyError(feature)

    def to_dict(self) -> dict:
        return {"method": self.method, "repeats": self.repeats, "seed": self.seed,
                "metric": self.metric, "baseline": self.baseline,
                "entries": [vars(e).copy() for e in self.entries]}

    @classmethod
    def from_dict(cls, d) -> "Explanation":
        return cls(d["method"], [ImportanceEntry(**e) for e in d["entries"]], d.get("repeats"),
                   d.get("seed"), d.get("metric"), d.get("baseline"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["feature", "importance", "rank", "signed"])
        for e in self.entries:
            writer.writerow([e.feature, repr(e.importance), e.rank, "" if e.signed is None else repr(e.signed)])
        return buf.getvalue()


def _ranked(method, names, importance, signed=None, **meta) -> Explanation:
    # Descending importance; equal importances fall back to feature-name order.
    order = sorted(range(len(names)), key=lambda j: (-importance[j], names[j]))
    entries = [ImportanceEntry(names[j], float(importance[j]), rank,
                               None if signed is None else float(signed[j]))
               for rank, j in enumerate(order, start=1)]
    return Explanation(method, entries, **meta)


def _final_step(model):
    return model.steps[-1][1] if hasattr(model, "steps") else model


def _feature_names(model, n):
    names = getattr(model, "feature_names_in_", None)
    if names is None and hasattr(model, "steps"):
        names = getattr(model.steps[0][1], "feature_names_in_", None)
    return [str(x) for x in names] if names is not None else [f"x{j}" for j in range(n)]


def coefficient_importance(model, feature_names=None) -> Explanation:
    """Rank features by ``|weight|`` of a fitted logistic model (signed weight kept)."""
    clf = _final_step(model)
    if not isinstance(clf, LogisticRegressionGD):
        raise TypeError(f"coefficient importance needs a logistic model, got {type(clf).__name__}; "
                        "use permutation_importance instead")
    w = np.asarray(clf.coef_, dtype=float)
    names = list(feature_names) if feature_names is not None else _feature_names(model, len(w))
    return _ranked(COEFFICIENT, names, np.abs(w), signed=w)


def _accuracy(model, X, y):
    return float((model.predict(X) == y).mean())


def permutation_importance(model, X, y, repeats: int = 10, seed: int = 0, scorer=None) -> Explanation:
    """Mean drop in score when one column is shuffled, over ``repeats`` seeded shuffles.

    Each (feature, repeat) shuffle uses its own pre-assigned stream, so the
    result does not depend on evaluation order.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    scorer = scorer or _accuracy
    y = np.asarray(y).astype(int)
    if isinstance(X, pd.DataFrame):
        # the model's predict rejects names it was not fit on
        names = [str(c) for c in X.columns]
        frame = X.reset_index(drop=True)
    else:
        values = np.asarray(X, dtype=float)
        names = _feature_names(model, values.shape[1])
        frame = pd.DataFrame(values, columns=names)
    baseline = scorer(model, frame, y)
    importance = np.zeros(len(names))
    for j, name in enumerate(names):
        column = frame[name].to_numpy()
        drops = []
        for r in range(repeats):
            perm = substream(seed, "permutation", name, r).permutation(len(column))
            shuffled = frame.copy()
            shuffled[name] = column[perm]
            drops.append(baseline - scorer(model, shuffled, y))
        importance[j] = float(np.mean(drops))
    return _ranked(PERMUTATION, names, importance, repeats=repeats, seed=seed, metric="accuracy",
                   baseline=baseline)
