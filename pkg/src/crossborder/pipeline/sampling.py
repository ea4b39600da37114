"""Selection of companies for manual labelling and the suppressed turnover histogram."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .config import DEFAULT_THRESHOLDS

SUPPRESSED = "suppressed"


def label_sample_select(companies: Iterable, thresholds: Mapping[str, float] | None = None) -> list[str]:
    """Ids of companies whose maximum annual turnover strictly exceeds their industry threshold.

    ``companies`` yields objects with ``company_id``, ``industry`` and
    ``max_turnover``; industries without their own threshold use ``Other``.
    """
    thresholds = dict(DEFAULT_THRESHOLDS if thresholds is None else thresholds)
    selected = []
    for comp in companies:
        limit = thresholds.get(comp.industry, thresholds.get("Other"))
        if limit is None:
            raise ValueError(f"no threshold for industry {comp.industry!r}")
        if comp.max_turnover > limit:
            selected.append(comp.company_id)
    return sorted(selected)


@dataclass(frozen=True)
class HistogramBin:
    lower: float
    upper: float
    count: int | None  # None when suppressed

    @property
    def suppressed(self) -> bool:
        return self.count is None


def log_bins(low: float, high: float, per_decade: int = 4) -> np.ndarray:
    if not 0 < low < high:
        raise ValueError("log bins need 0 < low < high")
    n = max(1, int(np.ceil(np.log10(high / low) * per_decade)))
    return np.logspace(np.log10(low), np.log10(high), n + 1)


def histogram(turnovers: Sequence[float], edges: Sequence[float], min_count: int = 20) -> list[HistogramBin]:
    """Counts per ``[edge_i, edge_i+1)`` bin (last bin closed); non-positive values are dropped and
    bins holding between 1 and ``min_count - 1`` companies are suppressed."""
    edges = np.asarray(edges, dtype=float)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    values = np.asarray(turnovers, dtype=float)
    values = values[np.isfinite(values) & (values > 0)]
    counts, _ = np.histogram(values, bins=edges)
    out = []
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        c = int(c)
        out.append(HistogramBin(float(lo), float(hi), None if 0 < c < min_count else c))
    return out


def histogram_export(turnovers: Sequence[float], edges: Sequence[float] | None, path: str | Path,
                     min_count: int = 20, comment: str | None = None) -> list[HistogramBin]:
    values = np.asarray(turnovers, dtype=float)
    if edges is None:
        positive = values[np.isfinite(values) & (values > 0)]
        if len(positive) == 0:
            raise ValueError("no positive turnover to bin")
        edges = log_bins(10 ** np.floor(np.log10(positive.min())), 10 ** np.ceil(np.log10(positive.max()) + 1e-12))
    bins = histogram(values, edges, min_count)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["lower", "upper", "count"])
        for b in bins:
            w.writerow([f"{b.lower:.6g}", f"{b.upper:.6g}", SUPPRESSED if b.suppressed else b.count])
    return bins
