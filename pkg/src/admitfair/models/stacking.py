from __future__ import annotations

import numpy as np
from sklearn.base import clone

from .._random import subseed, substream
from ..splits import stratified_fold_ids
from ._base import BinaryClassifier
from .forest import RandomForest
from .logistic import LogisticRegressionGD
from .mlp import NeuralNetwork
from .naive_bayes import GaussianNaiveBayes


def default_base_estimators():
    return [
        ("LogisticRegression", LogisticRegressionGD()),
        ("NaiveBayes", GaussianNaiveBayes()),
        ("RandomForest", RandomForest()),
        ("NeuralNetwork", NeuralNetwork()),
    ]


class StackedEnsemble(BinaryClassifier):
    """Logistic meta-model over out-of-fold base-model probabilities.

    Row i's meta-feature is produced by base models fit on the other
    ``cv - 1`` folds only; the bases are then refit on every row for
    prediction.
    """

    kind = "StackedEnsemble"

    def __init__(self, estimators=None, final_estimator=None, cv=5, random_state=0):
        self.estimators = estimators
        self.final_estimator = final_estimator
        self.cv = cv
        self.random_state = random_state

    def _bases(self):
        return self.estimators if self.estimators is not None else default_base_estimators()

    def _seeded(self, estimator, *names):
        est = clone(estimator)
        if "random_state" in est.get_params():
            est.set_params(random_state=subseed(self.random_state, "stacking", *names))
        return est

    def _fit(self, X, y):
        bases = self._bases()
        fold = stratified_fold_ids(y, self.cv, substream(self.random_state, "stacking", "folds"))
        oof = np.zeros((len(y), len(bases)))
        for f in range(self.cv):
            train, val = fold != f, fold == f
            for j, (name, est) in enumerate(bases):
                model = self._seeded(est, name, f).fit(X[train], y[train])
                oof[val, j] = model.predict_proba(X[val])[:, 1]
        self.oof_ = oof
        self.oof_fold_ = fold
        self.base_names_ = [name for name, _ in bases]
        self.estimators_ = [self._seeded(est, name, "full").fit(X, y) for name, est in bases]
        meta = self.final_estimator if self.final_estimator is not None else LogisticRegressionGD()
        self.final_estimator_ = clone(meta).fit(oof, y)

    def meta_features(self, X):
        return np.column_stack([est.predict_proba(X)[:, 1] for est in self.estimators_])

    def _proba(self, X):
        return self.final_estimator_.predict_proba(self.meta_features(X))[:, 1]

    def _params_dict(self):
        from .serialize import model_to_dict

        return {"base_names": list(self.base_names_),
                "bases": [model_to_dict(e) for e in self.estimators_],
                "meta": model_to_dict(self.final_estimator_)}

    def _load_params(self, d):
        from .serialize import model_from_dict

        self.base_names_ = list(d["base_names"])
        self.estimators_ = [model_from_dict(b) for b in d["bases"]]
        self.final_estimator_ = model_from_dict(d["meta"])
