import numpy as np
from scipy.special import expit

from ._base import BinaryClassifier


class LogisticRegressionGD(BinaryClassifier):
    """L2-regularised logistic regression fit by full-batch gradient descent.

    Minimises ``(sum(log_loss) + l2/2 * ||w||^2) / n`` from zero weights; the
    intercept is not penalised. Stops when the largest gradient component
    drops below ``tol`` or after ``max_iter`` steps.
    """

    kind = "LogisticRegression"

    def __init__(self, l2=1.0, learning_rate=0.1, max_iter=1000, tol=1e-6, random_state=0):
        self.l2 = l2
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def _gradient(self, X, y, w, b):
        n = len(y)
        residual = expit(X @ w + b) - y
        return (X.T @ residual + self.l2 * w) / n, residual.mean()

    def _fit(self, X, y):
        if not np.isfinite(X).all():
            raise ValueError("features must be finite")
        w = np.zeros(X.shape[1])
        b = 0.0
        self.n_iter_ = 0
        for _ in range(self.max_iter):
            gw, gb = self._gradient(X, y, w, b)
            if max(np.abs(gw).max(initial=0.0), abs(gb)) < self.tol:
                break
            w = w - self.learning_rate * gw
            b = b - self.learning_rate * gb
            self.n_iter_ += 1
        self.coef_ = w
        self.intercept_ = float(b)

    def decision_function(self, X):
        return self._validate_predict(X) @ self.coef_ + self.intercept_

    def _proba(self, X):
        return expit(X @ self.coef_ + self.intercept_)

    def _params_dict(self):
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_, "n_iter": self.n_iter_}

    def _load_params(self, d):
        self.coef_ = np.asarray(d["coef"], dtype=float)
        self.intercept_ = float(d["intercept"])
        self.n_iter_ = int(d["n_iter"])
