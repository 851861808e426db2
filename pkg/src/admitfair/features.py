"""Feature engineering: labels, one-hot blocks, composites, scaling, correlation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .data import CATEGORICAL, NUMERIC, DataError, DataTable
from .validation import bind_feature_names, check_bound_names

PERFORMANCE_INPUTS = ("math_score", "reading_score", "writing_score")


@dataclass
class FeatureMatrix:
    """Dense model input with its labels and the held-back sensitive columns."""

    values: np.ndarray
    feature_names: list[str]
    labels: np.ndarray
    sensitive: dict[str, np.ndarray] = field(default_factory=dict)
    row_ids: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.labels = np.asarray(self.labels).astype(int)
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D")
        n, p = self.values.shape
        if p != len(self.feature_names):
            raise ValueError(f"{p} columns but {len(self.feature_names)} feature names")
        if len(self.labels) != n:
            raise ValueError(f"{n} rows but {len(self.labels)} labels")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0/1")
        for name, col in self.sensitive.items():
            if len(col) != n:
                raise ValueError(f"sensitive column {name!r} has {len(col)} rows, expected {n}")
        if self.row_ids is None:
            self.row_ids = np.arange(n)

    @property
    def shape(self):
        return self.values.shape

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return FeatureMatrix(
            self.values[idx], list(self.feature_names), self.labels[idx],
            {k: np.asarray(v)[idx] for k, v in self.sensitive.items()},
            np.asarray(self.row_ids)[idx],
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, columns=self.feature_names, index=self.row_ids)


def binarize_label(probabilities, threshold: float = 0.5, row_ids=None) -> np.ndarray:
    """1 where the probability is at least ``threshold``, else 0."""
    p = np.asarray(probabilities, dtype=float)
    bad = ~((p >= 0.0) & (p <= 1.0))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        rid = row_ids[i] if row_ids is not None else i
        raise ValueError(f"probability {p[i]!r} at row {rid} is outside [0, 1]")
    return (p >= threshold).astype(int)


def composite_performance(math, reading, writing):
    """Arithmetic mean of the three high-school scores (scalars or arrays)."""
    parts = [np.asarray(x, dtype=float) for x in (math, reading, writing)]
    for part in parts:
        if np.isnan(part).any():
            raise ValueError("composite_performance got a missing score; impute first")
        if (part < 0).any():
            raise ValueError("scores must be non-negative")
    out = (parts[0] + parts[1] + parts[2]) / 3.0
    return float(out) if out.ndim == 0 else out


class OneHotEncoder(BaseEstimator, TransformerMixin):
    """Indicator columns per category, named ``"col=category"``.

    Categories are learned at fit time and sorted; unseen categories
    encode as all zeros.
    """

    def __init__(self, columns: Sequence[str] = ()):
        self.columns = columns

    def fit(self, table: DataTable, y=None):
        self.categories_ = {}
        for name in self.columns:
            if table.kinds.get(name) != CATEGORICAL:
                raise DataError(f"one-hot encoding needs a categorical column, {name!r} is not")
            col = table.column(name)
            if col.isna().any():
                raise DataError(f"column {name!r} still has missing cells; impute first")
            self.categories_[name] = sorted({str(v) for v in col})
        return self

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "categories_")
        return [f"{name}={cat}" for name, cats in self.categories_.items() for cat in cats]

    def transform(self, table: DataTable) -> np.ndarray:
        check_is_fitted(self, "categories_")
        blocks = []
        for name, cats in self.categories_.items():
            if table.kinds.get(name) != CATEGORICAL:
                raise DataError(f"one-hot encoding needs a categorical column, {name!r} is not")
            col = np.asarray(table.column(name), dtype=object)
            blocks.append((col[:, None] == np.asarray(cats, dtype=object)[None, :]).astype(float))
        if not blocks:
            return np.zeros((len(table), 0))
        return np.hstack(blocks)


class ZScoreScaler(BaseEstimator, TransformerMixin):
    """Per-column ``(x - mean) / std`` with the population standard deviation.

    Zero-variance columns map to 0 for every row.
    """

    def fit(self, X, y=None):
        bind_feature_names(self, X)
        X = check_array(X, dtype=float)
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        check_bound_names(self, X)
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"scaler was fit on {self.n_features_in_} columns, got {X.shape[1]}")
        safe = np.where(self.scale_ > 0, self.scale_, 1.0)
        out = (X - self.mean_) / safe
        out[:, self.scale_ == 0] = 0.0
        return out

    def to_dict(self):
        return {"mean": self.mean_.tolist(), "scale": self.scale_.tolist()}

    @classmethod
    def from_dict(cls, d):
        scaler = cls()
        scaler.mean_ = np.asarray(d["mean"], dtype=float)
        scaler.scale_ = np.asarray(d["scale"], dtype=float)
        scaler.n_features_in_ = len(scaler.mean_)
        return scaler


def correlation_matrix(matrix, names: Sequence[str] | None = None) -> pd.DataFrame:
    """Pearson correlations; pairs with a zero-variance column are 0, the diagonal 1."""
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("correlation_matrix needs at least 2 rows")
    centered = X - X.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    live = norms > 0
    safe = np.where(live, norms, 1.0)
    corr = (centered.T @ centered) / np.outer(safe, safe)
    corr[~live, :] = 0.0
    corr[:, ~live] = 0.0
    corr = np.clip((corr + corr.T) / 2, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    names = list(names) if names is not None else [f"x{j}" for j in range(X.shape[1])]
    return pd.DataFrame(corr, index=names, columns=names)


class TableVectorizer(BaseEstimator, TransformerMixin):
    """Turn a cleaned :class:`DataTable` into a :class:`FeatureMatrix`.

    Numeric columns pass through, categorical columns are one-hot encoded,
    the label column is binarized and the sensitive columns are set aside
    (not used as features). When all three high-school score columns are
    present a ``Performance`` composite is appended.
    """

    def __init__(self, label: str = "admit_prob", sensitive: Sequence[str] = ("gender", "parental_education"),
                 label_threshold: float = 0.5, exclude: Sequence[str] = ()):
        self.label = label
        self.sensitive = sensitive
        self.label_threshold = label_threshold
        self.exclude = exclude

    def fit(self, table: DataTable, y=None):
        if self.label not in table.kinds:
            raise DataError(f"label column {self.label!r} not found")
        held = {self.label, *self.sensitive, *self.exclude}
        self.numeric_ = [c for c, k in table.kinds.items() if k == NUMERIC and c not in held]
        self.add_performance_ = all(c in self.numeric_ for c in PERFORMANCE_INPUTS)
        categorical = [c for c, k in table.kinds.items() if k == CATEGORICAL and c not in held]
        self.encoder_ = OneHotEncoder(categorical).fit(table)
        self.feature_names_ = (list(self.numeric_) + (["Performance"] if self.add_performance_ else [])
                               + self.encoder_.get_feature_names_out())
        return self

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "feature_names_")
        return list(self.feature_names_)

    def transform(self, table: DataTable) -> FeatureMatrix:
        check_is_fitted(self, "feature_names_")
        missing = [c for c in self.numeric_ if c not in table.kinds]
        if missing:
            raise DataError(f"table lacks feature columns {missing}")
        blocks = [table.frame[self.numeric_].to_numpy(dtype=float)]
        if self.add_performance_:
            perf = composite_performance(*(table.frame[c].to_numpy(dtype=float) for c in PERFORMANCE_INPUTS))
            blocks.append(np.asarray(perf).reshape(-1, 1))
        blocks.append(self.encoder_.transform(table))
        values = np.hstack(blocks)
        if np.isnan(values).any():
            raise DataError("feature matrix has missing values; impute first")
        labels = binarize_label(table.column(self.label).to_numpy(dtype=float),
                                self.label_threshold, row_ids=table.row_ids)
        sensitive = {name: np.asarray(table.column(name), dtype=object)
                     for name in self.sensitive if name in table.kinds}
        return FeatureMatrix(values, list(self.feature_names_), labels, sensitive,
                             np.asarray(table.row_ids))

    def to_dict(self):
        check_is_fitted(self, "feature_names_")
        return {
            "label": self.label, "sensitive": list(self.sensitive),
            "label_threshold": self.label_threshold, "exclude": list(self.exclude),
            "numeric": list(self.numeric_), "add_performance": self.add_performance_,
            "categories": self.encoder_.categories_, "feature_names": list(self.feature_names_),
        }

    @classmethod
    def from_dict(cls, d: Mapping):
        vec = cls(d["label"], tuple(d["sensitive"]), d["label_threshold"], tuple(d["exclude"]))
        vec.numeric_ = list(d["numeric"])
        vec.add_performance_ = bool(d["add_performance"])
        vec.encoder_ = OneHotEncoder(list(d["categories"]))
        vec.encoder_.categories_ = {k: list(v) for k, v in d["categories"].items()}
        vec.feature_names_ = list(d["feature_names"])
        return vec
