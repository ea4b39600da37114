"""Support vector classification solved by SMO with second-order working-set selection.

Small training sets only: the full kernel matrix is held in memory.
"""

from __future__ import annotations

import numpy as np

from .base import Classifier, sample_weights

TAU = 1e-12


def linear_kernel(A: np.ndarray, B: np.ndarray, gamma: float | None = None) -> np.ndarray:
    return A @ B.T


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    d2 = np.sum(A ** 2, axis=1)[:, None] - 2 * A @ B.T + np.sum(B ** 2, axis=1)[None, :]
    return np.exp(-gamma * np.maximum(d2, 0.0))


def smo(K: np.ndarray, y: np.ndarray, C: np.ndarray, tol: float = 1e-3,
        max_iter: int = 200_000) -> tuple[np.ndarray, float, int]:
    """Solve the SVC dual for labels ``y`` in {-1, +1} and per-row bounds ``C``.

    Returns ``(alpha, rho, iterations)``; the decision value is
    ``sum_i alpha_i y_i K(x_i, x) - rho``.
    """
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    for it in range(1, max_iter + 1):
        yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(yG[up])])
        g_max = yG[i]
        g_min = yG[low].min()
        if g_max - g_min < tol:
            break
        # second-order choice of j among violating rows of the low set
        cand = low & (yG < g_max)
        b = g_max - yG[cand]
        a = QD[i] + QD[cand] - 2.0 * y[i] * y[cand] * Q[i, cand]
        a = np.where(a > 0, a, TAU)
        j = int(np.flatnonzero(cand)[np.argmin(-(b * b) / a)])

        Ci, Cj = C[i], C[j]
        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(QD[i] + QD[j] + 2 * Q[i, j], TAU)
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j], alpha[i] = 0.0, diff
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, -diff
            if diff > Ci - Cj:
                if alpha[i] > Ci:
                    alpha[i], alpha[j] = Ci, Ci - diff
            elif alpha[j] > Cj:
                alpha[j], alpha[i] = Cj, Cj + diff
        else:
            quad = max(QD[i] + QD[j] - 2 * Q[i, j], TAU)
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > Ci:
                if alpha[i] > Ci:
                    alpha[i], alpha[j] = Ci, total - Ci
            elif alpha[j] < 0:
                alpha[j], alpha[i] = 0.0, total
            if total > Cj:
                if alpha[j] > Cj:
                    alpha[j], alpha[i] = Cj, total - Cj
            elif alpha[i] < 0:
                alpha[i], alpha[j] = 0.0, total
        G += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)

    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(np.mean(yG[free]))
    else:
        # midpoint of the feasible interval for rho
        at_upper = alpha >= C
        at_lower = alpha <= 0
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub) and np.isfinite(lb) else float(ub if np.isfinite(ub) else lb)
    return alpha, rho, it


class SVC(Classifier):
    """Soft-margin SVC with a linear or RBF kernel; ``class_weight`` rescales C per class."""

    def __init__(self, C: float = 1.0, kernel: str = "rbf", gamma: float = 1.0, class_weight: str = "uniform",
                 tol: float = 1e-3, max_iter: int = 200_000):
        if kernel not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {kernel!r}")
        self.C, self.kernel, self.gamma, self.class_weight = C, kernel, gamma, class_weight
        self.tol, self.max_iter = tol, max_iter

    def _k(self, A, B):
        return rbf_kernel(A, B, self.gamma) if self.kernel == "rbf" else linear_kernel(A, B)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y01 = np.asarray(y, dtype=int)
        ys = np.where(y01 == 1, 1.0, -1.0)
        bounds = self.C * sample_weights(y01, self.class_weight)
        alpha, rho, self.n_iter_ = smo(self._k(X, X), ys, bounds, self.tol, self.max_iter)
        sv = alpha > 0
        self.support_vectors_ = X[sv]
        self.dual_coef_ = (alpha * ys)[sv]
        self.rho_ = rho
        if self.kernel == "linear":
            self.coef_ = self.dual_coef_ @ self.support_vectors_
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        if self.kernel == "linear":
            return X @ self.coef_ - self.rho_
        out = np.empty(len(X))
        for start in range(0, len(X), 4096):
            block = X[start:start + 4096]
            out[start:start + 4096] = self._k(block, self.support_vectors_) @ self.dual_coef_ - self.rho_
        return out
