"""Combination of the two classifiers, classification-error model and bias-corrected totals.

Conventions: vectors are ordered (webshop, non-webshop); ``P[g, h]`` is the
probability of predicting ``h`` when the truth is ``g``, rows indexed the same
way; ``Q`` is the inverse of ``P.T``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .mlkit.metrics import ConfusionCounts

MISSING = -1
I2 = np.eye(2)
VARIANCE_TOLERANCE = 1e-8
REPORT_HEADER = ["year", "y_M", "y_hat", "lambda_opt", "bias", "estimate", "std"]


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, trajectory: list[float]):
        super().__init__(message)
        self.trajectory = trajectory


def combine(br: int, web: int) -> int:
    """Merge register-based and website-based labels; -1 means missing."""
    for v in (br, web):
        if v not in (-1, 0, 1):
            raise ValueError(f"label must be -1, 0 or 1, got {v!r}")
    if br == MISSING:
        return web
    if web == MISSING:
        return br
    return min(br, web)


def combine_all(br: Sequence[int], web: Sequence[int]) -> np.ndarray:
    return np.array([combine(int(a), int(b)) for a, b in zip(br, web)], dtype=int)


@dataclass(frozen=True)
class ErrorModel:
    P: np.ndarray
    Q: np.ndarray = field(init=False)

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.shape != (2, 2) or (P < 0).any() or (P > 1).any() or not np.allclose(P.sum(axis=1), 1.0):
            raise ValueError("P must be a 2x2 row-stochastic matrix")
        if abs(np.linalg.det(P)) < 1e-12:
            raise ValueError("P^T is singular; the classifier carries no information")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", np.linalg.inv(P.T))

    @property
    def D(self) -> np.ndarray:
        """P^T - I."""
        return self.P.T - I2


def estimate_error_matrix(counts: ConfusionCounts) -> ErrorModel:
    pos, neg = counts.tp + counts.fn, counts.tn + counts.fp
    if pos == 0 or neg == 0:
        raise ValueError("the evaluation set needs both webshops and non-webshops")
    P = np.array([[counts.tp / pos, counts.fn / pos],
                  [counts.fp / neg, counts.tn / neg]])
    return ErrorModel(P)


@dataclass(frozen=True)
class Aggregate:
    y_hat: np.ndarray
    k_hat: np.ndarray
    n_unclassified: int = 0
    unclassified_turnover: float = 0.0


def aggregate(labels: Iterable[int], turnovers: Iterable[float]) -> Aggregate:
    """Turnover and squared-turnover sums per predicted class; label -1 is set aside."""
    labels = np.asarray(list(labels), dtype=int)
    y = np.asarray(list(turnovers), dtype=float)
    if labels.shape != y.shape:
        raise ValueError("labels and turnovers must have equal length")
    if not np.isin(labels, (-1, 0, 1)).all():
        raise ValueError("labels must be -1, 0 or 1")
    y_hat = np.array([y[labels == 1].sum(), y[labels == 0].sum()])
    k_hat = np.array([(y[labels == 1] ** 2).sum(), (y[labels == 0] ** 2).sum()])
    missing = labels == MISSING
    return Aggregate(y_hat, k_hat, int(missing.sum()), float(y[missing].sum()))


def bootstrap_moments(model: ErrorModel, y_hat, k_hat) -> tuple[np.ndarray, np.ndarray]:
    """Limits of the bootstrap bias and covariance as the number of replications grows."""
    y_hat = np.asarray(y_hat, dtype=float)
    k_hat = np.asarray(k_hat, dtype=float)
    Pt = model.P.T
    bias = (Pt - I2) @ y_hat
    cov = np.diag(Pt @ k_hat) - Pt @ np.diag(k_hat) @ model.P
    return bias, (cov + cov.T) / 2


def lambda_moments(model: ErrorModel, B: np.ndarray, omega: np.ndarray) -> tuple[float, float, float, float]:
    D, Q = model.D, model.Q
    S = D @ omega @ D.T
    m1 = float((D @ B)[0] ** 2)
    m2 = float((S @ Q.T @ Q)[0, 0])
    m3 = float((S @ (Q + Q.T) / 2)[0, 0])
    m4 = float(S[0, 0])
    return m1, m2, m3, m4


def _lambda_step(m: tuple[float, float, float, float]) -> float:
    m1, m2, m3, m4 = m
    den = m1 + m2 - 2 * m3 + m4
    if den == 0 or not np.isfinite(den):
        return 0.0
    return float(min(1.0, max(0.0, (m1 - m3 + m4) / den)))


def blend(model: ErrorModel, B0: np.ndarray, lam: float) -> np.ndarray:
    return (I2 + lam * (model.Q - I2)) @ B0


@dataclass(frozen=True)
class LambdaFit:
    lam: float
    B: np.ndarray
    iterations: int
    trajectory: tuple[float, ...]


def optimize_lambda(model: ErrorModel, y_hat, k_hat, tol: float = 1e-6, max_iter: int = 100) -> LambdaFit:
    """Fixed-point iteration for the bias-blending weight, starting from 0."""
    B0, omega = bootstrap_moments(model, y_hat, k_hat)
    B = B0
    lam_old = 0.0
    trajectory = [lam_old]
    for it in range(1, max_iter + 1):
        lam_new = _lambda_step(lambda_moments(model, B, omega))
        trajectory.append(lam_new)
        if abs(lam_new - lam_old) < tol:
            return LambdaFit(lam_new, blend(model, B0, lam_new), it, tuple(trajectory))
        B = blend(model, B0, lam_new)
        lam_old = lam_new
    raise ConvergenceError(f"lambda did not converge within {max_iter} iterations", trajectory)


def correction_operator(model: ErrorModel, lam: float) -> np.ndarray:
    """T with y_hat - B_lambda = T @ y_hat."""
    return 2 * I2 - model.P.T - lam * (model.Q - I2) @ model.D


@dataclass(frozen=True)
class CorrectionResult:
    y_M: float
    y_hat: np.ndarray
    lam: float
    B: np.ndarray
    y_final: float
    std: float
    iterations: int = 0
    year: int | None = None


def corrected_estimate(y_M: float, model: ErrorModel, y_hat, k_hat, lam: float, B,
                       iterations: int = 0, year: int | None = None) -> CorrectionResult:
    y_hat = np.asarray(y_hat, dtype=float)
    B = np.asarray(B, dtype=float)
    _, omega = bootstrap_moments(model, y_hat, k_hat)
    T = correction_operator(model, lam)
    var = float((T @ omega @ T.T)[0, 0])
    if var < -VARIANCE_TOLERANCE * max(1.0, float(np.abs(omega).max())):
        raise ValueError(f"negative variance {var}")
    return CorrectionResult(float(y_M), y_hat, float(lam), B, float(y_M + y_hat[0] - B[0]),
                            float(np.sqrt(max(var, 0.0))), iterations, year)


def estimate(y_M: float, model: ErrorModel, agg: Aggregate, year: int | None = None,
             tol: float = 1e-6, max_iter: int = 100) -> CorrectionResult:
    fit = optimize_lambda(model, agg.y_hat, agg.k_hat, tol, max_iter)
    return corrected_estimate(y_M, model, agg.y_hat, agg.k_hat, fit.lam, fit.B, fit.iterations, year)


def write_estimate_report(results: Sequence[CorrectionResult], path: str | Path, comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(REPORT_HEADER)
        for r in results:
            w.writerow(["" if r.year is None else r.year, f"{r.y_M + 0.0:.0f}", f"{r.y_hat[0] + 0.0:.0f}", f"{r.lam + 0.0:.6f}",
                        f"{r.B[0] + 0.0:.0f}", f"{r.y_final + 0.0:.0f}", f"{r.std + 0.0:.0f}"])
