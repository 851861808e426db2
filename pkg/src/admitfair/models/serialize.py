"""Versioned JSON documents for fitted classifiers."""

from __future__ import annotations

import json

import numpy as np

from .forest import RandomForest
from .logistic import LogisticRegressionGD
from .mlp import NeuralNetwork
from .naive_bayes import GaussianNaiveBayes
from .stacking import StackedEnsemble

FORMAT = "admitfair-model"
VERSION = 1

MODEL_KINDS = {
    "LogisticRegression": LogisticRegressionGD,
    "NaiveBayes": GaussianNaiveBayes,
    "RandomForest": RandomForest,
    "NeuralNetwork": NeuralNetwork,
    "StackedEnsemble": StackedEnsemble,
}


def _hyperparameters(model):
    return {k: v for k, v in model.get_params(deep=False).items()
            if k not in ("estimators", "final_estimator")}


def model_to_dict(model) -> dict:
    names = getattr(model, "feature_names_in_", None)
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": model.kind,
        "hyperparameters": _hyperparameters(model),
        "seed": model.get_params().get("random_state"),
        "n_features": int(model.n_features_in_),
        "feature_names": None if names is None else [str(n) for n in names],
        "parameters": model._params_dict(),
    }


def model_from_dict(d: dict):
    if d.get("format") != FORMAT:
        raise ValueError(f"not a serialized model (format={d.get('format')!r})")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported model document version {d.get('version')!r}")
    try:
        cls = MODEL_KINDS[d["kind"]]
    except KeyError:
        raise ValueError(f"unknown model kind {d['kind']!r}") from None
    model = cls(**d["hyperparameters"])
    model.n_features_in_ = int(d["n_features"])
    model.classes_ = np.array([0, 1])
    if d.get("feature_names") is not None:
        model.feature_names_in_ = np.asarray(d["feature_names"], dtype=object)
    model._load_params(d["parameters"])
    return model


def dumps(model) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True)


def loads(text: str):
    return model_from_dict(json.loads(text))
