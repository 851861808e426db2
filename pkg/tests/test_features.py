import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from admitfair.data import DataError, DataTable
from admitfair.features import (FeatureMatrix, OneHotEncoder, TableVectorizer, ZScoreScaler, binarize_label,
                                composite_performance, correlation_matrix)


@pytest.mark.parametrize("p, expected", [(0.72, 1), (0.50, 1), (0.34, 0), (0.0, 0), (1.0, 1)])
def test_binarize(p, expected):
    assert binarize_label([p])[0] == expected


def test_binarize_out_of_range_names_row():
    with pytest.raises(ValueError, match="row 11"):
        binarize_label([0.2, 1.3], row_ids=[10, 11])
    with pytest.raises(ValueError):
        binarize_label([float("nan")])


@given(st.lists(st.floats(0, 1), min_size=2, max_size=30))
def test_binarize_monotone(ps):
    ps = sorted(ps)
    out = binarize_label(ps)
    assert set(out) <= {0, 1}
    assert (np.diff(out) >= 0).all()


def _cat(values, name="gender"):
    return DataTable.from_columns({name: values}, {name: "categorical"})


def test_one_hot_indicator_and_unseen():
    enc = OneHotEncoder(["gender"]).fit(_cat(["F", "M"]))
    assert enc.get_feature_names_out() == ["gender=F", "gender=M"]
    assert enc.transform(_cat(["M"])).tolist() == [[0.0, 1.0]]
    assert enc.transform(_cat(["X"])).tolist() == [[0.0, 0.0]]


def test_one_hot_rows_sum_to_one():
    enc = OneHotEncoder(["c"]).fit(_cat(["a", "b", "c"], "c"))
    block = enc.transform(_cat(["c", "a"], "c"))
    assert block.shape == (2, 3)
    assert block.sum(axis=1).tolist() == [1.0, 1.0]


def test_one_hot_rejects_numeric_and_missing():
    with pytest.raises(DataError):
        OneHotEncoder(["x"]).fit(DataTable.from_columns({"x": [1.0]}))
    with pytest.raises(DataError):
        OneHotEncoder(["g"]).fit(_cat(["F", None]))


@pytest.mark.parametrize("scores, expected", [((80, 90, 100), 90.0), ((0, 0, 0), 0.0), ((72, 72, 74), 218 / 3)])
def test_composite(scores, expected):
    assert composite_performance(*scores) == pytest.approx(expected, abs=1e-12)


def test_composite_rejects_missing():
    with pytest.raises(ValueError):
        composite_performance([1.0, float("nan")], [1.0, 1.0], [1.0, 1.0])


def test_scaler_population_std():
    out = ZScoreScaler().fit_transform(np.array([[1.0], [2.0], [3.0]]))
    assert out.ravel() == pytest.approx([-math.sqrt(1.5), 0.0, math.sqrt(1.5)], abs=1e-12)


def test_scaler_constant_column():
    assert ZScoreScaler().fit_transform(np.full((3, 1), 5.0)).ravel().tolist() == [0.0, 0.0, 0.0]


def test_identity_scaler_is_identity(rng):
    s = ZScoreScaler.from_dict({"mean": [0.0, 0.0], "scale": [1.0, 1.0]})
    X = rng.normal(size=(7, 2))
    assert np.array_equal(s.transform(X), X)


def test_scaler_checks_names():
    s = ZScoreScaler().fit(pd.DataFrame({"a": [1.0, 2.0], "b": [3.0, 4.0]}))
    with pytest.raises(ValueError, match="order"):
        s.transform(pd.DataFrame({"b": [1.0], "a": [2.0]}))
    with pytest.raises(ValueError, match="c"):
        s.transform(pd.DataFrame({"a": [1.0], "c": [2.0]}))


@settings(max_examples=40, deadline=None)
@given(arrays(float, (6, 3), elements=st.floats(-100, 100)), st.floats(0, 1))
def test_scaler_affine_per_column(X, t):
    s = ZScoreScaler().fit(X)
    z0 = s.transform(np.zeros((1, 3)))
    z1 = s.transform(np.ones((1, 3)))
    zt = s.transform(np.full((1, 3), t))
    assert np.allclose(zt, (1 - t) * z0 + t * z1, atol=1e-9)


def test_correlation_examples():
    x = np.array([1.0, 2.0, 3.0])
    c = correlation_matrix(np.column_stack([x, -x, [1.0, 2.0, 4.0]]), ["x", "neg", "y"])
    assert c.loc["x", "x"] == 1.0
    assert c.loc["x", "neg"] == pytest.approx(-1.0, abs=1e-12)
    # by hand: sum dx*dy = 3, sum dx^2 = 2, sum dy^2 = 14/3
    assert c.loc["x", "y"] == pytest.approx(3 / math.sqrt(2 * 14 / 3), abs=1e-12)
    assert c.loc["x", "y"] == pytest.approx(0.9819805060619657, abs=1e-12)


def test_correlation_zero_variance():
    c = correlation_matrix(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]))
    assert c.iloc[0, 1] == 0.0 and c.iloc[1, 1] == 1.0


@settings(max_examples=40, deadline=None)
@given(arrays(float, (8, 3), elements=st.floats(-10, 10)), st.floats(0.01, 100), st.floats(-100, 100))
def test_correlation_affine_invariance(X, a, b):
    Y = X.copy()
    Y[:, 1] = a * Y[:, 1] + b
    before, after = correlation_matrix(X).to_numpy(), correlation_matrix(Y).to_numpy()
    # rescaling can turn a tiny nonzero variance into an exact zero in floating point
    if np.ptp(X[:, 1]) > 1e-6:
        assert np.allclose(before, after, atol=1e-9)


def _grad_table():
    return DataTable.from_columns(
        {"GRE": [330.0, 300.0, 315.0], "gender": ["F", "M", "F"], "major": ["cs", "ee", "cs"],
         "admit_prob": [0.9, 0.3, 0.5]},
        {"GRE": "numeric", "gender": "categorical", "major": "categorical", "admit_prob": "numeric"})


def test_vectorizer_shapes_and_sensitive_holdout():
    t = _grad_table()
    fm = TableVectorizer(sensitive=("gender",)).fit(t).transform(t)
    assert fm.feature_names == ["GRE", "major=cs", "major=ee"]
    assert fm.labels.tolist() == [1, 0, 1]
    assert fm.sensitive["gender"].tolist() == ["F", "M", "F"]
    assert fm.values.tolist() == [[330.0, 1.0, 0.0], [300.0, 0.0, 1.0], [315.0, 1.0, 0.0]]


def test_vectorizer_performance_composite():
    t = DataTable.from_columns({"math_score": [80.0, 60.0], "reading_score": [90.0, 60.0],
                                "writing_score": [100.0, 63.0], "admit_prob": [0.9, 0.2]})
    fm = TableVectorizer(sensitive=()).fit(t).transform(t)
    assert fm.feature_names[-1] == "Performance"
    assert fm.values[:, -1].tolist() == [90.0, 61.0]


def test_vectorizer_round_trip_and_missing_label():
    t = _grad_table()
    vec = TableVectorizer(sensitive=("gender",)).fit(t)
    clone = TableVectorizer.from_dict(vec.to_dict())
    assert np.array_equal(clone.transform(t).values, vec.transform(t).values)
    with pytest.raises(DataError, match="label"):
        TableVectorizer(label="nope").fit(t)


def test_feature_matrix_validation():
    with pytest.raises(ValueError):
        FeatureMatrix(np.zeros((2, 2)), ["a"], [0, 1])
    with pytest.raises(ValueError):
        FeatureMatrix(np.zeros((2, 1)), ["a"], [0, 2])
    fm = FeatureMatrix(np.arange(6.0).reshape(3, 2), ["a", "b"], [0, 1, 0], {"g": ["x", "y", "z"]})
    sub = fm.subset([2, 0])
    assert sub.row_ids.tolist() == [2, 0] and sub.sensitive["g"].tolist() == ["z", "x"]
