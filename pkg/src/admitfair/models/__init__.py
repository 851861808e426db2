"""The five admission classifiers behind one predict-probability contract."""

from sklearn.pipeline import Pipeline

from .._random import subseed
from ..features import ZScoreScaler
from ._base import BinaryClassifier, check_feature_names, positive_proba
from .forest import DecisionTree, RandomForest
from .logistic import LogisticRegressionGD
from .mlp import NeuralNetwork
from .naive_bayes import GaussianNaiveBayes
from .serialize import MODEL_KINDS, dumps, loads, model_from_dict, model_to_dict
from .stacking import StackedEnsemble

__all__ = [
    "BinaryClassifier", "DecisionTree", "GaussianNaiveBayes", "LogisticRegressionGD", "MODEL_KINDS",
    "NeuralNetwork", "RandomForest", "StackedEnsemble", "check_feature_names", "dumps", "loads",
    "make_model", "model_from_dict", "model_to_dict", "positive_proba",
]


def make_model(kind: str, seed: int = 0, scale: bool = True, **overrides):
    """Fresh estimator of ``kind``; with ``scale`` it is wrapped behind a z-score step.

    The seed is turned into a per-kind stream so models sharing a pipeline
    seed do not share random draws.
    """
    try:
        cls = MODEL_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; choose from {sorted(MODEL_KINDS)}") from None
    model = cls(random_state=subseed(seed, "model", kind), **overrides)
    if not scale:
        return model
    return Pipeline([("scale", ZScoreScaler()), ("model", model)])
