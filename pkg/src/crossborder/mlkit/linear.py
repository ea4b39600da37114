"""Linear and generative classifiers: LR, LDA, QDA, multinomial NB and kNN."""

from __future__ import annotations

import numpy as np

from .base import Classifier, sample_weights

COV_RIDGE = 1e-6


class LogisticRegression(Classifier):
    """Logistic regression with an L1 or L2 penalty, fitted by accelerated proximal gradient.

    Minimises ``C * sum_i w_i * logloss_i + penalty(coef)``; the intercept
    is not penalised.
    """

    def __init__(self, C: float = 1.0, penalty: str = "l2", class_weight: str = "uniform",
                 max_iter: int = 20000, tol: float = 1e-7):
        if penalty not in ("l1", "l2"):
            raise ValueError(f"unknown penalty {penalty!r}")
        self.C, self.penalty, self.class_weight = C, penalty, class_weight
        self.max_iter, self.tol = max_iter, tol

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, d = X.shape
        sw = sample_weights(y, self.class_weight)
        Xb = np.hstack([X, np.ones((n, 1))])
        # work with the objective divided by C*n for a well-scaled step size
        reg = 1.0 / (self.C * n)
        lipschitz = sw.max() * np.linalg.norm(Xb, 2) ** 2 / (4 * n)
        if self.penalty == "l2":
            lipschitz += reg
        step = 1.0 / lipschitz
        theta = np.zeros(d + 1)
        momentum = theta.copy()
        t = 1.0
        for _ in range(self.max_iter):
            z = Xb @ momentum
            p = 1.0 / (1.0 + np.exp(-z))
            grad = Xb.T @ (sw * (p - y)) / n
            if self.penalty == "l2":
                grad[:d] += reg * momentum[:d]
            new = momentum - step * grad
            if self.penalty == "l1":
                new[:d] = np.sign(new[:d]) * np.maximum(np.abs(new[:d]) - step * reg, 0.0)
            t_next = (1 + np.sqrt(1 + 4 * t * t)) / 2
            momentum = new + ((t - 1) / t_next) * (new - theta)
            converged = np.max(np.abs(new - theta)) < self.tol
            theta, t = new, t_next
            if converged:
                break
        self.coef_, self.intercept_ = theta[:d], theta[d]
        return self

    def decision_function(self, X):
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_


def _inverse_and_logdet(cov: np.ndarray) -> tuple[np.ndarray, float]:
    """Inverse and log-determinant, adding the ridge only when ``cov`` is singular."""
    try:
        chol = np.linalg.cholesky(cov)
        if np.min(np.diag(chol)) ** 2 < 1e-12 * max(np.max(np.diag(cov)), 1e-300):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        cov = cov + COV_RIDGE * np.eye(len(cov))
        chol = np.linalg.cholesky(cov)
    inv = np.linalg.inv(cov)
    return inv, 2.0 * np.sum(np.log(np.diag(chol)))


class LDA(Classifier):
    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.classes_ = np.array([0, 1])
        self.means_ = np.array([X[y == c].mean(axis=0) for c in self.classes_])
        self.priors_ = np.array([np.mean(y == c) for c in self.classes_])
        centred = X - self.means_[y.astype(int)]
        cov = centred.T @ centred / max(len(X) - 2, 1)
        inv, _ = _inverse_and_logdet(cov)
        self.coef_ = self.means_ @ inv
        self.intercept_ = -0.5 * np.sum(self.coef_ * self.means_, axis=1) + np.log(self.priors_)
        return self

    def decision_function(self, X):
        scores = np.asarray(X, dtype=float) @ self.coef_.T + self.intercept_
        return scores[:, 1] - scores[:, 0]


class QDA(Classifier):
    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.params_ = []
        for c in (0, 1):
            Xc = X[y == c]
            mean = Xc.mean(axis=0)
            centred = Xc - mean
            cov = centred.T @ centred / max(len(Xc) - 1, 1)
            inv, logdet = _inverse_and_logdet(cov)
            self.params_.append((mean, inv, logdet, np.log(len(Xc) / len(X))))
        return self

    def _log_density(self, X, c):
        mean, inv, logdet, logprior = self.params_[c]
        diff = X - mean
        return -0.5 * logdet - 0.5 * np.einsum("ij,jk,ik->i", diff, inv, diff) + logprior

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        return self._log_density(X, 1) - self._log_density(X, 0)


class MultinomialNB(Classifier):
    """Multinomial naive Bayes; features must be non-negative counts or frequencies."""

    def __init__(self, alpha: float = 1.0):
        self.alpha = alpha

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        if (X < 0).any():
            raise ValueError("multinomial naive Bayes needs non-negative features")
        totals = np.array([X[y == c].sum(axis=0) for c in (0, 1)]) + self.alpha
        self.feature_log_prob_ = np.log(totals / totals.sum(axis=1, keepdims=True))
        self.class_log_prior_ = np.log(np.array([np.mean(y == 0), np.mean(y == 1)]))
        return self

    def decision_function(self, X):
        joint = np.asarray(X, dtype=float) @ self.feature_log_prob_.T + self.class_log_prior_
        return joint[:, 1] - joint[:, 0]


class KNN(Classifier):
    """Euclidean k-nearest neighbours, majority vote; equal distances favour the earlier training row."""

    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, X, y):
        self.X_ = np.asarray(X, dtype=float)
        self.y_ = np.asarray(y, dtype=int)
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        k = min(self.k, len(self.X_))
        out = np.empty(len(X))
        for start in range(0, len(X), 2048):
            block = X[start:start + 2048]
            d2 = (np.sum(block ** 2, axis=1)[:, None] - 2 * block @ self.X_.T + np.sum(self.X_ ** 2, axis=1)[None, :])
            d2 = np.maximum(d2, 0.0)
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
            votes = self.y_[nearest].sum(axis=1)
            # positive margin wins; a tied vote goes to class 0
            out[start:start + 2048] = votes - (k - votes)
        return out
