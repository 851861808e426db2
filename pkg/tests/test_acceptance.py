"""Acceptance criteria 1-9, each tagged with ``@pytest.mark.criterion(n)``."""

import itertools
import math
import os
import time

import numpy as np
import pytest

from admitfair.cli import main
from admitfair.data import clean_anomalies
from admitfair.evaluation import CvConfig, auroc, select_best, stratified_split
from admitfair.explain import coefficient_importance, permutation_importance
from admitfair.fairness import SensitiveAttribute, demographic_parity_gap, equalized_odds_gap, max_pairwise_gap
from admitfair.features import TableVectorizer
from admitfair.models import GaussianNaiveBayes, NeuralNetwork, RandomForest, StackedEnsemble, make_model
from admitfair.models.mlp import loss_and_grad
from admitfair.pipeline import PipelineConfig, run_pipeline
from admitfair.splits import stratified_fold_ids, stratified_holdout_indices
from admitfair.synthetic import SyntheticConfig, generate_synthetic

KINDS = ("LogisticRegression", "NaiveBayes", "RandomForest", "NeuralNetwork", "StackedEnsemble")


# 1. fairness arithmetic

def _predictions(rates, n=100):
    pred, groups = [], []
    for name, r in rates.items():
        k = round(r * n)
        pred += [1] * k + [0] * (n - k)
        groups += [name] * n
    return np.array(pred), SensitiveAttribute("group", groups)


@pytest.mark.criterion(1)
@pytest.mark.parametrize("rates, gap", [({"male": 0.67, "female": 0.76}, 0.09),
                                        ({"high": 0.78, "low": 0.67}, 0.11)])
def test_c1_demographic_parity_gaps(rates, gap):
    pred, attr = _predictions(rates)
    assert abs(demographic_parity_gap(pred, attr) - gap) <= 1e-12
    assert abs(max_pairwise_gap(rates) - gap) <= 1e-12


# 2. model selection

@pytest.mark.criterion(2)
def test_c2_select_best_on_reported_accuracies():
    accuracies = {"LogisticRegression": 89.5, "NaiveBayes": 88.1, "RandomForest": 87.6, "NeuralNetwork": 85.2,
                  "StackedEnsemble": 91.0}
    assert select_best(accuracies) == "StackedEnsemble"


# 3. cleaning count

@pytest.mark.criterion(3)
def test_c3_cleaning_leaves_361_rows():
    start = time.perf_counter()
    table = generate_synthetic(SyntheticConfig(grad_rows=400, anomalies=39), seed=7)
    cleaned, log = clean_anomalies(table)
    elapsed = time.perf_counter() - start
    assert len(table) == 400
    assert len(cleaned) == 361 and log.rows_after == 361 and len(log.removed_row_ids) == 39
    assert elapsed < 1.0


# 4. property-based accuracy substitute on the 2,000-row fixture

# Frozen at first build: cross-validated accuracy, seed 7, noise 1.0, 200 injected anomalies.
FROZEN_CV = {
    "LogisticRegression": (0.8930555555555556, 0.781875),
    "NaiveBayes": (0.8840277777777777, 0.786875),
    "RandomForest": (0.8923611111111112, 0.85625),
    "NeuralNetwork": (0.8631944444444445, 0.759375),
    "StackedEnsemble": (0.89375, 0.845),
}


@pytest.fixture(scope="module")
def fixture_2000():
    start = time.perf_counter()
    cfg = PipelineConfig.from_mapping({"seed": 7, "synthetic": {"grad_rows": 2000, "anomalies": 200, "noise": 1.0}})
    bundle = run_pipeline(cfg)
    return bundle, time.perf_counter() - start


@pytest.mark.criterion(4)
def test_c4_all_models_at_least_80_percent(fixture_2000):
    bundle, _ = fixture_2000
    for kind in KINDS:
        assert bundle.cv_cleaned[kind].accuracy >= 0.80, kind


@pytest.mark.criterion(4)
def test_c4_stack_within_one_point_of_best_base(fixture_2000):
    bundle, _ = fixture_2000
    best_base = max(bundle.cv_cleaned[k].accuracy for k in KINDS[:4])
    assert bundle.cv_cleaned["StackedEnsemble"].accuracy >= best_base - 0.01


@pytest.mark.criterion(4)
def test_c4_cleaning_helps_logistic(fixture_2000):
    bundle, _ = fixture_2000
    assert bundle.rows["merged"] - bundle.rows["cleaned"] == 200
    assert bundle.cv_cleaned["LogisticRegression"].accuracy > bundle.cv_uncleaned["LogisticRegression"].accuracy


@pytest.mark.criterion(4)
def test_c4_frozen_regression_values(fixture_2000):
    bundle, elapsed = fixture_2000
    for kind, (after, before) in FROZEN_CV.items():
        assert bundle.cv_cleaned[kind].accuracy == pytest.approx(after, abs=1e-12), kind
        assert bundle.cv_uncleaned[kind].accuracy == pytest.approx(before, abs=1e-12), kind
    assert elapsed < 120


# 5. conditional reproduction on the original graduate CSV

GRAD_CSV = os.environ.get("ADMITFAIR_GRAD_CSV")
KAGGLE_RENAME = {"GRE Score": "GRE", "TOEFL Score": "TOEFL", "Chance of Admit": "admit_prob"}


@pytest.mark.criterion(5)
@pytest.mark.skipif(not GRAD_CSV or not os.path.exists(GRAD_CSV),
                    reason="set ADMITFAIR_GRAD_CSV to the original 400-row graduate admissions CSV")
def test_c5_original_data_accuracy():
    cfg = PipelineConfig.from_mapping({
        "seed": 7, "sources": [{"path": GRAD_CSV, "context": "grad", "rename": KAGGLE_RENAME}],
        "sensitive": [], "exclude": ["Serial No."]})
    bundle = run_pipeline(cfg)
    assert abs(100 * bundle.cv_cleaned["LogisticRegression"].accuracy - 89.5) <= 3.0
    assert abs(100 * bundle.cv_cleaned["StackedEnsemble"].accuracy - 91.0) <= 3.0


# 6. oracle equivalences

def _trapezoid_auroc(y, s):
    P, N = y.sum(), len(y) - y.sum()
    points = [(0.0, 0.0)]
    for thr in sorted(set(s), reverse=True):
        sel = s >= thr
        points.append(((sel & (y == 0)).sum() / N, (sel & (y == 1)).sum() / P))
    return sum((x1 - x0) * (y0 + y1) / 2 for (x0, y0), (x1, y1) in zip(points, points[1:]))


def _pairwise_auroc(y, s):
    pos, neg = s[y == 1], s[y == 0]
    return sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg) / (len(pos) * len(neg))


@pytest.mark.criterion(6)
def test_c6_auroc_dual_oracle():
    rng = np.random.default_rng(6)
    for _ in range(100):
        n = int(rng.integers(2, 30))
        y = rng.integers(0, 2, n)
        y[:2] = (0, 1)
        s = np.round(rng.random(n), int(rng.integers(1, 3)))
        ours = auroc(y, s)
        assert abs(ours - _pairwise_auroc(y, s)) <= 1e-9
        assert abs(ours - _trapezoid_auroc(y, s)) <= 1e-9


@pytest.mark.criterion(6)
def test_c6_naive_bayes_direct_density():
    rng = np.random.default_rng(66)
    for _ in range(20):
        X = rng.normal(size=(30, 3)) * rng.uniform(0.5, 2, 3)
        y = np.arange(30) % 2
        X[y == 1] += rng.normal(size=3)
        model = GaussianNaiveBayes().fit(X, y)
        probes = rng.normal(size=(10, 3))
        ours = model.predict_proba(probes)[:, 1]
        for x, p in zip(probes, ours):
            joint = []
            for c in (0, 1):
                dens = model.class_prior_[c]
                for j in range(3):
                    var = model.var_[c, j]
                    dens *= math.exp(-(x[j] - model.theta_[c, j]) ** 2 / (2 * var)) / math.sqrt(2 * math.pi * var)
                joint.append(dens)
            assert abs(p - joint[1] / (joint[0] + joint[1])) <= 1e-9


@pytest.mark.criterion(6)
def test_c6_mlp_gradient_finite_differences():
    rng = np.random.default_rng(666)
    eps = 1e-6
    for _ in range(20):
        n, p, h = int(rng.integers(5, 20)), int(rng.integers(1, 5)), int(rng.integers(2, 8))
        X = rng.normal(size=(n, p))
        y = rng.integers(0, 2, n).astype(float)
        params = [rng.normal(size=(p, h)), rng.normal(size=h), rng.normal(size=h), float(rng.normal())]
        _, grads = loss_and_grad(params, X, y)
        flat = np.concatenate([np.ravel(g) for g in grads])
        numeric = []
        for k, block in enumerate(params):
            arr = np.atleast_1d(np.array(block, dtype=float))
            for idx in np.ndindex(arr.shape):
                losses = []
                for delta in (eps, -eps):
                    bumped = arr.copy()
                    bumped[idx] += delta
                    trial = list(params)
                    trial[k] = bumped if np.ndim(block) else float(bumped[0])
                    losses.append(loss_and_grad(trial, X, y)[0])
                numeric.append((losses[0] - losses[1]) / (2 * eps))
        numeric = np.array(numeric)
        rel = np.linalg.norm(flat - numeric) / max(np.linalg.norm(flat) + np.linalg.norm(numeric), 1e-12)
        assert rel < 1e-4


@pytest.mark.criterion(6)
def test_c6_equalized_odds_brute_force():
    rng = np.random.default_rng(6666)
    checked = 0
    while checked < 50:
        pred, y = rng.integers(0, 2, 20), rng.integers(0, 2, 20)
        groups = rng.choice(["a", "b", "c"], 20)
        rates = {}
        for g in sorted(set(groups)):
            counts = {(pp, tt): 0 for pp in (0, 1) for tt in (0, 1)}
            for pp, tt, gg in zip(pred, y, groups):
                if gg == g:
                    counts[(pp, tt)] += 1
            pos, neg = counts[(1, 1)] + counts[(0, 1)], counts[(1, 0)] + counts[(0, 0)]
            if pos and neg:
                rates[g] = (counts[(1, 1)] / pos, counts[(1, 0)] / neg)
        if len(rates) < 2:
            continue
        expected = max(0.5 * (abs(a[0] - b[0]) + abs(a[1] - b[1]))
                       for a, b in itertools.combinations(rates.values(), 2))
        assert abs(equalized_odds_gap(pred, y, SensitiveAttribute("g", groups)) - expected) <= 1e-12
        checked += 1


# 7. structural invariants

@pytest.fixture(scope="module")
def fixture_matrix():
    table, _ = clean_anomalies(generate_synthetic(SyntheticConfig(grad_rows=400, anomalies=39), seed=7))
    return TableVectorizer().fit(table).transform(table)


@pytest.mark.criterion(7)
def test_c7_forest_shape(fixture_matrix):
    forest = make_model("RandomForest", seed=7).fit(fixture_matrix.values, fixture_matrix.labels).steps[-1][1]
    assert isinstance(forest, RandomForest)
    assert len(forest.trees_) == 100
    assert all(t.depth() <= 5 for t in forest.trees_)


@pytest.mark.criterion(7)
def test_c7_mlp_width(fixture_matrix):
    net = make_model("NeuralNetwork", seed=7).fit(fixture_matrix.values, fixture_matrix.labels).steps[-1][1]
    assert isinstance(net, NeuralNetwork)
    assert net.coefs_[0].shape[1] == 16 and net.intercepts_[0].shape == (16,)


@pytest.mark.criterion(7)
def test_c7_stratified_split_proportions(fixture_matrix):
    y = fixture_matrix.labels
    for seed in range(20):
        train, test = stratified_split(fixture_matrix, 0.8, seed)
        for c in (0, 1):
            assert abs((test.labels == c).sum() - 0.2 * (y == c).sum()) <= 1
        assert len(set(train.row_ids) | set(test.row_ids)) == len(y)
    rng = np.random.default_rng(0)
    for _ in range(50):
        yy = rng.integers(0, 3, int(rng.integers(20, 200)))
        if np.bincount(yy).min() < 2:
            continue
        frac = float(rng.uniform(0.05, 0.5))
        _, te = stratified_holdout_indices(yy, frac, rng)
        for c in np.unique(yy):
            assert abs((yy[te] == c).sum() - frac * (yy == c).sum()) <= 1


@pytest.mark.criterion(7)
def test_c7_kfold_partition(fixture_matrix):
    y = fixture_matrix.labels
    fold = stratified_fold_ids(y, CvConfig().k, np.random.default_rng(7))
    seen = np.zeros(len(y), dtype=int)
    for f in range(10):
        seen[fold == f] += 1
    assert (seen == 1).all()
    assert np.bincount(fold).max() - np.bincount(fold).min() <= 1


@pytest.mark.criterion(7)
def test_c7_stacked_meta_features_out_of_fold(fixture_matrix):
    X, y = fixture_matrix.values, fixture_matrix.labels
    stack = StackedEnsemble(random_state=7).fit(X, y)
    assert stack.oof_.shape == (len(y), 4)
    for f in range(stack.cv):
        val = stack.oof_fold_ == f
        for j, (name, est) in enumerate(stack._bases()):
            refit = stack._seeded(est, name, f).fit(X[~val], y[~val])
            assert np.array_equal(refit.predict_proba(X[val])[:, 1], stack.oof_[val, j])


# 8. determinism of full runs

DETERMINISM_CONFIG = """seed: 7
synthetic: {grad_rows: 400, anomalies: 39, noise_features: 1}
llm: {enabled: true, scorer: mock}
"""


@pytest.mark.criterion(8)
def test_c8_two_runs_byte_identical(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(DETERMINISM_CONFIG)
    start = time.perf_counter()
    for name in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--seed", "7", "--out", str(tmp_path / name)]) == 0
    elapsed = time.perf_counter() - start
    files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    files_b = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert files_a == files_b and len(files_a) >= 7
    for name in files_a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    assert elapsed < 120


# 9. explainability sanity

@pytest.fixture(scope="module")
def explain_fixture():
    table = generate_synthetic(SyntheticConfig(grad_rows=2000, noise_features=1), seed=7)
    fm = TableVectorizer().fit(table).transform(table)
    return stratified_split(fm, 0.8, seed=7)


@pytest.mark.criterion(9)
def test_c9_coefficients_rank_academic_signals_first(explain_fixture):
    train, _ = explain_fixture
    model = make_model("LogisticRegression", seed=7).fit(train.to_frame(), train.labels)
    assert set(coefficient_importance(model).ranking()[:3]) == {"GRE", "TOEFL", "CGPA"}


@pytest.mark.criterion(9)
@pytest.mark.parametrize("kind", ["LogisticRegression", "RandomForest"])
def test_c9_noise_feature_permutation_importance(explain_fixture, kind):
    start = time.perf_counter()
    train, test = explain_fixture
    model = make_model(kind, seed=7).fit(train.to_frame(), train.labels)
    explanation = permutation_importance(model, test.to_frame(), test.labels, repeats=10, seed=7)
    assert abs(explanation.importance_of("noise_0")) <= 0.01
    assert time.perf_counter() - start < 60
