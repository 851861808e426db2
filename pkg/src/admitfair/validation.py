"""Input checks shared by transformers and classifiers."""

import numpy as np


def check_feature_names(expected, got) -> None:
    """Raise ``ValueError`` naming the discrepancy when two name lists differ."""
    if list(expected) == list(got):
        return
    missing = [n for n in expected if n not in got]
    unexpected = [n for n in got if n not in expected]
    detail = []
    if missing:
        detail.append(f"missing {missing}")
    if unexpected:
        detail.append(f"unexpected {unexpected}")
    if not detail:
        detail.append("same names in a different order")
    raise ValueError("feature names do not match the fitted model: " + "; ".join(detail))


def bind_feature_names(estimator, X) -> None:
    names = getattr(X, "columns", None)
    if names is not None:
        estimator.feature_names_in_ = np.asarray([str(c) for c in names], dtype=object)
    elif hasattr(estimator, "feature_names_in_"):
        del estimator.feature_names_in_


def check_bound_names(estimator, X) -> None:
    names = getattr(X, "columns", None)
    bound = getattr(estimator, "feature_names_in_", None)
    if names is not None and bound is not None:
        check_feature_names(list(bound), [str(c) for c in names])
