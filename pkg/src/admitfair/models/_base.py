from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..validation import bind_feature_names, check_bound_names, check_feature_names  # noqa: F401


class BinaryClassifier(ClassifierMixin, BaseEstimator):
    """Shared input handling for the 0/1 classifiers in this package.

    Subclasses implement ``_fit(X, y)`` and ``_proba(X)`` (positive-class
    probability). Feature names are bound at fit time when ``X`` is a
    DataFrame and enforced on later calls that also pass names.
    """

    kind: str = ""

    def _validate_fit(self, X, y):
        bind_feature_names(self, X)
        X = check_array(X, dtype=float)
        y = np.asarray(y)
        if y.ndim != 1 or len(y) != len(X):
            raise ValueError(f"y must be 1-D with {len(X)} entries")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0/1")
        if len(X) == 0:
            raise ValueError("cannot fit on an empty matrix")
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        return X, y.astype(int)

    def _validate_predict(self, X):
        check_is_fitted(self, "n_features_in_")
        check_bound_names(self, X)
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"model expects {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        self._fit(X, y)
        return self

    def predict_proba(self, X):
        p1 = np.clip(self._proba(self._validate_predict(X)), 0.0, 1.0)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X, threshold: float = 0.5):
        return (self.predict_proba(X)[:, 1] >= threshold).astype(int)


def positive_proba(model, X) -> np.ndarray:
    return model.predict_proba(X)[:, 1]
