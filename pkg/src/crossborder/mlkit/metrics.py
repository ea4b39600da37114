from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_labels(cls, predictions: Sequence[int], truth: Sequence[int]) -> "ConfusionCounts":
        pred = np.asarray(predictions)
        true = np.asarray(truth)
        if pred.shape != true.shape:
            raise ValueError("predictions and truth must have equal length")
        return cls(
            tp=int(np.sum((pred == 1) & (true == 1))),
            fp=int(np.sum((pred == 1) & (true == 0))),
            tn=int(np.sum((pred == 0) & (true == 0))),
            fn=int(np.sum((pred == 0) & (true == 1))),
        )


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def precision_recall_f1(counts: ConfusionCounts) -> tuple[float, float, float]:
    precision = _ratio(counts.tp, counts.tp + counts.fp)
    recall = _ratio(counts.tp, counts.tp + counts.fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    return f1, precision, recall


def scores(predictions: Sequence[int], truth: Sequence[int]) -> tuple[float, float, float, ConfusionCounts]:
    """(F1, precision, recall, counts) for the positive class; empty denominators give 0."""
    counts = ConfusionCounts.from_labels(predictions, truth)
    f1, precision, recall = precision_recall_f1(counts)
    return f1, precision, recall, counts
