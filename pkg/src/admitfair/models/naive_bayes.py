import numpy as np
from scipy.special import logsumexp

from ._base import BinaryClassifier


class GaussianNaiveBayes(BinaryClassifier):
    """Gaussian class-conditional densities with posteriors evaluated in log space.

    Per-class variances are clamped below at
    ``var_smoothing * max(feature variance)`` so constant features stay finite.
    """

    kind = "NaiveBayes"

    def __init__(self, var_smoothing=1e-9, random_state=0):
        self.var_smoothing = var_smoothing
        self.random_state = random_state

    def _fit(self, X, y):
        counts = np.bincount(y, minlength=2)
        if (counts == 0).any():
            raise ValueError("naive Bayes needs both classes in the training data")
        largest = float(X.var(axis=0).max(initial=0.0))
        self.variance_floor_ = self.var_smoothing * largest if largest > 0 else self.var_smoothing
        self.class_prior_ = counts / counts.sum()
        self.theta_ = np.vstack([X[y == c].mean(axis=0) for c in (0, 1)])
        var = np.vstack([X[y == c].var(axis=0) for c in (0, 1)])
        self.var_ = np.maximum(var, self.variance_floor_)

    def joint_log_likelihood(self, X):
        """``log P(c) + sum_j log N(x_j; mean_cj, var_cj)`` for c in (0, 1)."""
        out = np.empty((len(X), 2))
        for c in (0, 1):
            log_norm = -0.5 * np.log(2.0 * np.pi * self.var_[c]).sum()
            quad = -0.5 * (((X - self.theta_[c]) ** 2) / self.var_[c]).sum(axis=1)
            out[:, c] = np.log(self.class_prior_[c]) + log_norm + quad
        return out

    def _proba(self, X):
        jll = self.joint_log_likelihood(X)
        return np.exp(jll[:, 1] - logsumexp(jll, axis=1))

    def _params_dict(self):
        return {"class_prior": self.class_prior_.tolist(), "theta": self.theta_.tolist(),
                "var": self.var_.tolist(), "variance_floor": self.variance_floor_}

    def _load_params(self, d):
        self.class_prior_ = np.asarray(d["class_prior"], dtype=float)
        self.theta_ = np.asarray(d["theta"], dtype=float)
        self.var_ = np.asarray(d["var"], dtype=float)
        self.variance_floor_ = float(d["variance_floor"])
