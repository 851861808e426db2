from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .._random import substream
from ._base import BinaryClassifier


@dataclass
class DecisionTree:
    """Array-backed binary tree. ``feature == -1`` marks a leaf; ``value`` is P(y=1) at the node."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X):
        node = np.zeros(len(X), dtype=int)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            rows = np.flatnonzero(inner)
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def predict_proba(self, X):
        return self.value[self.apply(X)]

    def depth(self) -> int:
        depths = {0: 0}
        deepest = 0
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                for child in (self.left[i], self.right[i]):
                    depths[int(child)] = depths[i] + 1
                    deepest = max(deepest, depths[i] + 1)
        return deepest

    def to_dict(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(), "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["feature"], dtype=int), np.asarray(d["threshold"], dtype=float),
                   np.asarray(d["left"], dtype=int), np.asarray(d["right"], dtype=int),
                   np.asarray(d["value"], dtype=float))


@njit(cache=True)
def _grow(X, y, max_depth, candidates):
    """Depth-first Gini tree growth.

    ``candidates[s]`` lists the columns examined by the ``s``-th split attempt.
    Returns node arrays plus the node count.
    """
    n, _ = X.shape
    capacity = 2 ** (max_depth + 1) - 1
    feature = np.full(capacity, -1, dtype=np.int64)
    threshold = np.zeros(capacity)
    left = np.full(capacity, -1, dtype=np.int64)
    right = np.full(capacity, -1, dtype=np.int64)
    value = np.zeros(capacity)

    # rows of every node live in a contiguous slice of `order`
    order = np.arange(n)
    stack_node = np.empty(capacity, dtype=np.int64)
    stack_lo = np.empty(capacity, dtype=np.int64)
    stack_hi = np.empty(capacity, dtype=np.int64)
    stack_depth = np.empty(capacity, dtype=np.int64)
    top = 0
    stack_node[0], stack_lo[0], stack_hi[0], stack_depth[0] = 0, 0, n, 0
    top = 1
    n_nodes = 1
    attempt = 0
    pos = 0
    for i in range(n):
        pos += y[i]
    value[0] = pos / n

    while top > 0:
        top -= 1
        node, lo, hi, depth = stack_node[top], stack_lo[top], stack_hi[top], stack_depth[top]
        m = hi - lo
        node_pos = 0
        for i in range(lo, hi):
            node_pos += y[order[i]]
        if depth >= max_depth or m < 2 or node_pos == 0 or node_pos == m:
            continue
        cands = candidates[attempt]
        attempt += 1

        best_imp = np.inf
        best_f = -1
        best_thr = 0.0
        rows = order[lo:hi]
        for f in cands:
            xs = X[rows, f]
            srt = np.argsort(xs)
            left_pos = 0
            for i in range(m - 1):
                left_pos += y[rows[srt[i]]]
                a = xs[srt[i]]
                b = xs[srt[i + 1]]
                if not b > a:
                    continue
                nl = i + 1.0
                nr = m - nl
                pr = node_pos - left_pos
                imp = (2.0 * left_pos * (nl - left_pos) / nl + 2.0 * pr * (nr - pr) / nr) / m
                if imp < best_imp:
                    best_imp = imp
                    best_f = f
                    thr = (a + b) / 2.0
                    if thr >= b:
                        thr = a
                    best_thr = thr
        if best_f < 0:
            continue

        # partition the slice: rows going left first
        buf = np.empty(m, dtype=np.int64)
        k = 0
        for i in range(m):
            if X[rows[i], best_f] <= best_thr:
                buf[k] = rows[i]
                k += 1
        n_left = k
        for i in range(m):
            if not X[rows[i], best_f] <= best_thr:
                buf[k] = rows[i]
                k += 1
        order[lo:hi] = buf

        feature[node] = best_f
        threshold[node] = best_thr
        li, ri = n_nodes, n_nodes + 1
        n_nodes += 2
        left[node], right[node] = li, ri
        lp = 0
        for i in range(lo, lo + n_left):
            lp += y[order[i]]
        value[li] = lp / n_left
        value[ri] = (node_pos - lp) / (m - n_left)
        stack_node[top], stack_lo[top], stack_hi[top], stack_depth[top] = ri, lo + n_left, hi, depth + 1
        top += 1
        stack_node[top], stack_lo[top], stack_hi[top], stack_depth[top] = li, lo, lo + n_left, depth + 1
        top += 1
    return feature, threshold, left, right, value, n_nodes


def grow_tree(X, y, max_depth: int, max_features: int, rng: np.random.Generator) -> DecisionTree:
    """Gini tree on (X, y); ``max_features`` candidate columns are drawn for every split."""
    p = X.shape[1]
    slots = 2 ** max_depth - 1
    candidates = np.argsort(rng.random((max(slots, 1), p)), axis=1)[:, :max_features].astype(np.int64)
    feature, threshold, left, right, value, n_nodes = _grow(
        np.ascontiguousarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64), int(max_depth), candidates)
    return DecisionTree(feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
                        value[:n_nodes])


class RandomForest(BinaryClassifier):
    """Bagged Gini trees; probability is the mean leaf frequency across trees.

    Tree ``t`` draws its bootstrap sample and split candidates from a stream
    keyed by ``(random_state, t)``, so any single tree can be rebuilt alone.
    """

    kind = "RandomForest"

    def __init__(self, n_estimators=100, max_depth=5, max_features="sqrt", random_state=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.max_features = max_features
        self.random_state = random_state

    def _n_candidates(self, p):
        if self.max_features == "sqrt":
            return max(1, math.ceil(math.sqrt(p)))
        if self.max_features is None:
            return p
        return max(1, min(p, int(self.max_features)))

    def _fit(self, X, y):
        n, p = X.shape
        k = self._n_candidates(p)
        self.trees_ = []
        for t in range(self.n_estimators):
            rng = substream(self.random_state, "tree", t)
            boot = rng.integers(0, n, size=n)
            self.trees_.append(grow_tree(X[boot], y[boot], self.max_depth, k, rng))

    def _proba(self, X):
        total = np.zeros(len(X))
        for tree in self.trees_:
            total += tree.predict_proba(X)
        return total / len(self.trees_)

    def _params_dict(self):
        return {"trees": [t.to_dict() for t in self.trees_]}

    def _load_params(self, d):
        self.trees_ = [DecisionTree.from_dict(t) for t in d["trees"]]
