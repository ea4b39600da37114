"""CART trees and the three tree ensembles (random forest, gradient boosting, AdaBoost)."""

from __future__ import annotations

import numpy as np

from .base import Classifier, sample_weights


class Tree:
    """Array-backed binary tree. ``value`` holds the positive-class share (gini) or the mean target (mse)."""

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add_leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.value) - 1

    def freeze(self) -> "Tree":
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=float)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.value = np.asarray(self.value, dtype=float)
        return self

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return node

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def _best_split(X: np.ndarray, target: np.ndarray, w: np.ndarray, features: np.ndarray,
                criterion: str) -> tuple[int, float, float] | None:
    """Best (feature, threshold, impurity decrease) over ``features``, or None if no split helps."""
    Xf = X[:, features]
    order = np.argsort(Xf, axis=0, kind="stable")
    xs = np.take_along_axis(Xf, order, axis=0)
    ws = w[order]
    wt = (w * target)[order]
    cw = np.cumsum(ws, axis=0)[:-1]
    cwt = np.cumsum(wt, axis=0)[:-1]
    total_w, total_wt = w.sum(), (w * target).sum()
    rw, rwt = total_w - cw, total_wt - cwt
    valid = (xs[1:] > xs[:-1]) & (cw > 0) & (rw > 0)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        if criterion == "gini":
            # weighted child impurity: W * 2p(1-p) with p = positive share
            pl, pr = cwt / cw, rwt / rw
            child = cw * 2 * pl * (1 - pl) + rw * 2 * pr * (1 - pr)
            p = total_wt / total_w
            parent = total_w * 2 * p * (1 - p)
        else:
            wtt = (w * target * target)[order]
            cwtt = np.cumsum(wtt, axis=0)[:-1]
            rwtt = (w * target * target).sum() - cwtt
            child = (cwtt - cwt ** 2 / cw) + (rwtt - rwt ** 2 / rw)
            parent = (w * target * target).sum() - total_wt ** 2 / total_w
    child = np.where(valid, child, np.inf)
    flat = int(np.argmin(child))
    row, col = divmod(flat, child.shape[1])
    gain = parent - child[row, col]
    if not np.isfinite(child[row, col]) or gain <= 1e-12 * max(abs(parent), 1e-300):
        return None
    threshold = (xs[row, col] + xs[row + 1, col]) / 2.0
    if threshold >= xs[row + 1, col]:  # float midpoint collapsed onto the upper value
        threshold = xs[row, col]
    return int(features[col]), float(threshold), float(gain)


def build_tree(X: np.ndarray, target: np.ndarray, w: np.ndarray, max_depth: int, criterion: str = "gini",
               max_features: int | None = None, rng: np.random.Generator | None = None,
               min_samples_split: int = 2) -> Tree:
    tree = Tree()
    n_features = X.shape[1]

    def leaf_value(idx):
        ws = w[idx].sum()
        return float((w[idx] * target[idx]).sum() / ws) if ws > 0 else 0.0

    def grow(idx: np.ndarray, depth: int) -> int:
        node = tree.add_leaf(leaf_value(idx))
        if depth >= max_depth or len(idx) < min_samples_split:
            return node
        t = target[idx]
        if criterion == "gini" and (np.all(t == t[0])):
            return node
        if max_features is not None and max_features < n_features:
            feats = np.sort(rng.choice(n_features, size=max_features, replace=False))
        else:
            feats = np.arange(n_features)
        split = _best_split(X[idx], t, w[idx], feats, criterion)
        if split is None:
            return node
        f, thr, _ = split
        mask = X[idx, f] <= thr
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = grow(idx[mask], depth + 1)
        tree.right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(len(X)), 0)
    return tree.freeze()


class DecisionTree(Classifier):
    def __init__(self, d: int = 3, class_weight: str = "uniform"):
        self.d, self.class_weight = d, class_weight

    def fit(self, X, y, sample_weight=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        w = sample_weights(y, self.class_weight) if sample_weight is None else np.asarray(sample_weight, float)
        self.tree_ = build_tree(X, y, w, self.d)
        return self

    def decision_function(self, X):
        return self.tree_.predict_value(np.asarray(X, dtype=float)) - 0.5


class RandomForest(Classifier):
    """Bootstrap-aggregated CART trees with sqrt(d) candidate features per node; majority vote."""

    def __init__(self, n: int = 100, d: int = 3, class_weight: str = "uniform", seed: int = 0):
        self.n, self.d, self.class_weight, self.seed = n, d, class_weight, seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        rng = np.random.default_rng(self.seed)
        base_w = sample_weights(y, self.class_weight)
        m = max(1, int(np.sqrt(X.shape[1])))
        self.trees_ = []
        for _ in range(self.n):
            draws = np.bincount(rng.integers(0, len(X), size=len(X)), minlength=len(X))
            keep = draws > 0
            self.trees_.append(build_tree(X[keep], y[keep], (base_w * draws)[keep], self.d,
                                          max_features=m, rng=rng))
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        votes = np.mean([t.predict_value(X) for t in self.trees_], axis=0)
        return votes - 0.5


class GradientBoosting(Classifier):
    """Binomial-deviance gradient boosting with least-squares regression trees and Newton leaf values."""

    def __init__(self, n: int = 100, d: int = 3, lr: float = 0.1):
        self.n, self.d, self.lr = n, d, lr

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        prior = np.clip(y.mean(), 1e-12, 1 - 1e-12)
        self.init_ = float(np.log(prior / (1 - prior)))
        F = np.full(len(X), self.init_)
        ones = np.ones(len(X))
        self.trees_ = []
        for _ in range(self.n):
            p = 1.0 / (1.0 + np.exp(-F))
            residual = y - p
            tree = build_tree(X, residual, ones, self.d, criterion="mse")
            leaves = tree.apply(X)
            hess = p * (1 - p)
            num = np.bincount(leaves, weights=residual, minlength=len(tree.value))
            den = np.bincount(leaves, weights=hess, minlength=len(tree.value))
            tree.value = np.where(den > 1e-150, num / np.maximum(den, 1e-150), 0.0)
            F += self.lr * tree.value[leaves]
            self.trees_.append(tree)
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        F = np.full(len(X), self.init_)
        for tree in self.trees_:
            F += self.lr * tree.predict_value(X)
        return F


class AdaBoost(Classifier):
    """Discrete AdaBoost (SAMME, two classes) over depth-limited CART trees."""

    def __init__(self, n: int = 50, d: int = 1, lr: float = 1.0, class_weight: str = "uniform"):
        self.n, self.d, self.lr, self.class_weight = n, d, lr, class_weight

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        w = sample_weights(y, self.class_weight)
        w = w / w.sum()
        self.trees_, self.alphas_ = [], []
        for _ in range(self.n):
            tree = build_tree(X, y, w, self.d)
            miss = (tree.predict_value(X) > 0.5) != (y == 1)
            err = float(np.sum(w[miss]) / np.sum(w))
            if err <= 0:
                self.trees_.append(tree)
                self.alphas_.append(1.0)
                break
            if err >= 0.5:
                if not self.trees_:
                    self.trees_.append(tree)
                    self.alphas_.append(1.0)
                break
            alpha = self.lr * np.log((1 - err) / err)
            self.trees_.append(tree)
            self.alphas_.append(alpha)
            w = w * np.exp(alpha * miss)
            w = w / w.sum()
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        score = np.zeros(len(X))
        for tree, alpha in zip(self.trees_, self.alphas_):
            score += alpha * np.where(tree.predict_value(X) > 0.5, 1.0, -1.0)
        return score
