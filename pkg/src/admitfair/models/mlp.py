from __future__ import annotations

import numpy as np
from scipy.special import expit

from .._random import substream
from ..splits import stratified_holdout_indices
from ._base import BinaryClassifier

_EPS = 1e-12


def forward(params, X):
    W1, b1, w2, b2 = params
    pre = X @ W1 + b1
    hidden = np.maximum(pre, 0.0)
    return pre, hidden, expit(hidden @ w2 + b2)


def log_loss(p, y):
    p = np.clip(p, _EPS, 1 - _EPS)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def loss_and_grad(params, X, y):
    """Mean log loss of a ReLU-hidden / sigmoid-output net and its analytic gradient."""
    W1, b1, w2, b2 = params
    pre, hidden, p = forward(params, X)
    n = len(y)
    d_out = (p - y) / n
    g_w2 = hidden.T @ d_out
    g_b2 = d_out.sum()
    d_hidden = np.outer(d_out, w2) * (pre > 0)
    g_W1 = X.T @ d_hidden
    g_b1 = d_hidden.sum(axis=0)
    return log_loss(p, y), (g_W1, g_b1, g_w2, g_b2)


class NeuralNetwork(BinaryClassifier):
    """One-hidden-layer perceptron trained by full-batch gradient descent.

    A stratified ``validation_fraction`` of the training rows is held out;
    training stops after ``patience`` epochs without a validation-loss
    improvement and the best-epoch weights are kept.
    """

    kind = "NeuralNetwork"

    def __init__(self, hidden_units=16, learning_rate=0.01, max_epochs=500, patience=10,
                 validation_fraction=0.1, random_state=0):
        self.hidden_units = hidden_units
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def init_params(self, n_features):
        rng = substream(self.random_state, "mlp-init")
        limit1 = np.sqrt(6.0 / (n_features + self.hidden_units))
        limit2 = np.sqrt(6.0 / (self.hidden_units + 1))
        W1 = rng.uniform(-limit1, limit1, size=(n_features, self.hidden_units))
        w2 = rng.uniform(-limit2, limit2, size=self.hidden_units)
        return [W1, np.zeros(self.hidden_units), w2, 0.0]

    def _fit(self, X, y):
        if len(y) < 10:
            raise ValueError("neural network needs at least 10 training rows for the validation split")
        rng = substream(self.random_state, "mlp-split")
        train, val = stratified_holdout_indices(y, self.validation_fraction, rng)
        Xt, yt, Xv, yv = X[train], y[train], X[val], y[val]

        params = self.init_params(X.shape[1])
        best_params = [np.copy(p) for p in params]
        best_loss = log_loss(forward(params, Xv)[2], yv)
        self.loss_curve_, self.validation_curve_ = [], []
        wait = 0
        for _ in range(self.max_epochs):
            loss, grads = loss_and_grad(params, Xt, yt)
            params = [p - self.learning_rate * g for p, g in zip(params, grads)]
            val_loss = log_loss(forward(params, Xv)[2], yv)
            self.loss_curve_.append(loss)
            self.validation_curve_.append(val_loss)
            if val_loss < best_loss:
                best_loss, best_params, wait = val_loss, [np.copy(p) for p in params], 0
            else:
                wait += 1
                if wait >= self.patience:
                    break
        self.n_epochs_ = len(self.loss_curve_)
        self.best_validation_loss_ = best_loss
        W1, b1, w2, b2 = best_params
        self.coefs_ = [W1, w2]
        self.intercepts_ = [b1, float(b2)]

    @property
    def params_(self):
        return [self.coefs_[0], self.intercepts_[0], self.coefs_[1], self.intercepts_[1]]

    def _proba(self, X):
        return forward(self.params_, X)[2]

    def _params_dict(self):
        return {"W1": self.coefs_[0].tolist(), "b1": self.intercepts_[0].tolist(),
                "w2": self.coefs_[1].tolist(), "b2": self.intercepts_[1],
                "n_epochs": self.n_epochs_}

    def _load_params(self, d):
        self.coefs_ = [np.asarray(d["W1"], dtype=float).reshape(-1, self.hidden_units),
                       np.asarray(d["w2"], dtype=float)]
        self.intercepts_ = [np.asarray(d["b1"], dtype=float), float(d["b2"])]
        self.n_epochs_ = int(d["n_epochs"])
