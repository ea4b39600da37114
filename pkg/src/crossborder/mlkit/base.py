from __future__ import annotations

import numpy as np


def sample_weights(y: np.ndarray, scheme: str = "uniform") -> np.ndarray:
    """Per-row weights: all ones, or inverse class frequency scaled to mean one ("balanced")."""
    y = np.asarray(y)
    if scheme == "uniform":
        return np.ones(len(y))
    if scheme != "balanced":
        raise ValueError(f"unknown class weighting {scheme!r}")
    weights = np.empty(len(y))
    for c in (0, 1):
        mask = y == c
        if mask.any():
            weights[mask] = len(y) / (2.0 * mask.sum())
    return weights


class Classifier:
    """Binary classifier over labels {0, 1}; subclasses implement ``fit`` and ``decision_function``."""

    def fit(self, X, y):  # pragma: no cover - interface
        raise NotImplementedError

    def decision_function(self, X) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(int)
