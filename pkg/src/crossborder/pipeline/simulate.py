"""Seeded end-to-end replications on synthetic populations with known webshop totals."""

from __future__ import annotations

import csv
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .run import read_classifications, run
from .synth import SyntheticSpec, synthesize, write_synthetic


@dataclass(frozen=True)
class Replication:
    seed: int
    year: int
    true_total: float
    estimate: float
    std: float
    y_M: float
    y_hat: float  # uncorrected modelled webshop turnover
    modelled_true: tuple[float, float]  # true (webshop, non-webshop) turnover of classified modelled companies
    lam: float

    @property
    def covered(self) -> bool:
        return abs(self.estimate - self.true_total) <= 2 * self.std


def replicate(spec: SyntheticSpec, seed: int, workdir: str | Path | None = None, **overrides) -> list[Replication]:
    """Synthesize, run every pipeline stage on the precomputed features, and compare with the truth."""
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        data = synthesize(spec, seed)
        write_synthetic(data, tmp, spec, seed)
        cfg = RunConfig(tax_returns=f"{tmp}/tax_returns.csv", register=f"{tmp}/register.csv",
                        labels=f"{tmp}/labels.csv", url_matches=f"{tmp}/url_matches.csv",
                        distance_features=f"{tmp}/distance_features.csv", web_features=f"{tmp}/web_features.csv",
                        output_dir=f"{tmp}/run", seed=seed, years=tuple(spec.years), **overrides)
        run(cfg, ("estimate",))
        with open(f"{tmp}/run/estimates.csv", newline="") as fh:
            rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
        s_hat = read_classifications(f"{tmp}/run/classifications.csv")
    labels = np.array([s_hat[cid] for cid in data.ids])
    modelled = ~data.train & (labels != -1)
    out = []
    for row in rows:
        year = int(row["year"])
        y = data.turnover[:, data.years.index(year)]
        truth = (float((y * data.webshop)[modelled].sum()), float((y * (1 - data.webshop))[modelled].sum()))
        out.append(Replication(seed, year, data.true_total(year), float(row["estimate"]), float(row["std"]),
                               float(row["y_M"]), float(row["y_hat"]), truth, float(row["lambda_opt"])))
    return out
