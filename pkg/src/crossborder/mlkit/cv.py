"""Model specs, training dispatch, stratified folds and the F1 grid search."""

from __future__ import annotations

import csv
import itertools
import pickle
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .base import Classifier
from .linear import KNN, LDA, QDA, LogisticRegression, MultinomialNB
from .metrics import scores
from .svm import SVC
from .trees import AdaBoost, GradientBoosting, RandomForest

ALGORITHMS = ("LR", "LDA", "LinSVC", "kNN", "MNB", "QDA", "RBFSVC", "RF", "GB", "AB")
WEIGHTED = {"LR", "LinSVC", "RBFSVC", "RF", "AB"}
_DEPTHS = list(range(1, 9))
_ESTIMATORS = [50, 100, 200, 500]
_WEIGHTS = ["uniform", "balanced"]

GRIDS: dict[str, dict[str, list]] = {
    "LR": {"penalty": ["l1", "l2"], "C": [0.001, 0.01, 0.1, 1.0, 10.0], "class_weight": _WEIGHTS},
    "LDA": {},
    "LinSVC": {"C": [0.001, 0.01, 0.1, 1.0, 10.0], "class_weight": _WEIGHTS},
    "kNN": {"k": list(range(1, 40, 2))},
    "MNB": {"alpha": [1e-10, 0.01, 0.1, 1.0]},
    "QDA": {},
    "RBFSVC": {"C": [0.01, 0.1, 1.0, 10.0, 100.0], "gamma": [0.001, 0.01, 0.1, 1.0], "class_weight": _WEIGHTS},
    "RF": {"n": _ESTIMATORS, "d": _DEPTHS, "class_weight": _WEIGHTS},
    "GB": {"n": _ESTIMATORS, "d": _DEPTHS, "lr": [0.01, 0.1, 1.0]},
    "AB": {"n": _ESTIMATORS, "d": _DEPTHS, "lr": [0.01, 0.1, 1.0], "class_weight": _WEIGHTS},
}

MODEL_MAGIC = b"XBMODEL"
MODEL_VERSION = 1


@dataclass
class LabeledSet:
    rows: np.ndarray
    labels: np.ndarray
    ids: list
    kind: str = "distance"  # "distance" or "web"

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        self.ids = list(self.ids)
        if self.rows.ndim != 2 or not (len(self.rows) == len(self.labels) == len(self.ids)):
            raise ValueError("rows, labels and ids must have equal length")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx: np.ndarray) -> "LabeledSet":
        return LabeledSet(self.rows[idx], self.labels[idx], [self.ids[i] for i in idx], self.kind)


@dataclass(frozen=True)
class ModelSpec:
    algorithm: str
    params: tuple = ()  # sorted (name, value) pairs so specs hash and compare

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")

    @classmethod
    def of(cls, algorithm: str, **params) -> "ModelSpec":
        return cls(algorithm, tuple(sorted(params.items())))

    @property
    def param_dict(self) -> dict[str, Any]:
        return dict(self.params)

    def label(self) -> str:
        return " ".join(f"{k}={v}" for k, v in self.params) or "-"


def build_model(spec: ModelSpec, seed: int = 0) -> Classifier:
    p = spec.param_dict
    cw = p.get("class_weight", "uniform")
    a = spec.algorithm
    if a == "LR":
        return LogisticRegression(C=p.get("C", 1.0), penalty=p.get("penalty", "l2"), class_weight=cw)
    if a == "LDA":
        return LDA()
    if a == "QDA":
        return QDA()
    if a == "LinSVC":
        return SVC(C=p.get("C", 1.0), kernel="linear", class_weight=cw)
    if a == "RBFSVC":
        return SVC(C=p.get("C", 1.0), kernel="rbf", gamma=p.get("gamma", 1.0), class_weight=cw)
    if a == "kNN":
        return KNN(k=int(p.get("k", 5)))
    if a == "MNB":
        return MultinomialNB(alpha=p.get("alpha", 1.0))
    if a == "RF":
        return RandomForest(n=int(p.get("n", 100)), d=int(p.get("d", 3)), class_weight=cw, seed=seed)
    if a == "GB":
        return GradientBoosting(n=int(p.get("n", 100)), d=int(p.get("d", 3)), lr=p.get("lr", 0.1))
    return AdaBoost(n=int(p.get("n", 50)), d=int(p.get("d", 1)), lr=p.get("lr", 1.0), class_weight=cw)


def train(spec: ModelSpec, data: LabeledSet, seed: int = 0) -> Classifier:
    if spec.algorithm == "MNB" and data.kind == "distance":
        raise ValueError("multinomial naive Bayes is not applicable to continuous distance features")
    if not np.isfinite(data.rows).all():
        raise ValueError("features must be finite")
    if len(np.unique(data.labels)) < 2:
        raise ValueError("training data must contain both classes")
    model = build_model(spec, seed)
    model.fit(data.rows, data.labels)
    model.spec = spec
    return model


def stratified_kfold(labels: Sequence[int], k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Test-index arrays of ``k`` folds; each class is shuffled and dealt round-robin."""
    labels = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    order = []
    for c in (0, 1):
        members = np.flatnonzero(labels == c)
        if len(members) < k:
            raise ValueError(f"class {c} has {len(members)} members, fewer than k={k}")
        order.append(rng.permutation(members))
    order = np.concatenate(order)
    assignment = np.arange(len(order)) % k
    return [np.sort(order[assignment == f]) for f in range(k)]


@dataclass
class CvResult:
    spec: ModelSpec
    f1: list[float] = field(default_factory=list)
    precision: list[float] = field(default_factory=list)
    recall: list[float] = field(default_factory=list)
    error: str | None = None

    @staticmethod
    def _mean(v):
        return float(np.mean(v)) if v else float("nan")

    @staticmethod
    def _std(v):
        return float(np.std(v)) if v else float("nan")

    @property
    def mean_f1(self) -> float:
        return self._mean(self.f1)

    @property
    def std_f1(self) -> float:
        return self._std(self.f1)

    @property
    def mean_precision(self) -> float:
        return self._mean(self.precision)

    @property
    def std_precision(self) -> float:
        return self._std(self.precision)

    @property
    def mean_recall(self) -> float:
        return self._mean(self.recall)

    @property
    def std_recall(self) -> float:
        return self._std(self.recall)

    @property
    def ok(self) -> bool:
        return self.error is None


def cross_validate(spec: ModelSpec, data: LabeledSet, folds: list[np.ndarray], seed: int = 0) -> CvResult:
    result = CvResult(spec)
    everything = np.arange(len(data))
    try:
        for test_idx in folds:
            train_idx = np.setdiff1d(everything, test_idx)
            model = train(spec, data.subset(train_idx), seed)
            f1, precision, recall, _ = scores(model.predict(data.rows[test_idx]), data.labels[test_idx])
            result.f1.append(f1)
            result.precision.append(precision)
            result.recall.append(recall)
    except (ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
        result.f1, result.precision, result.recall = [], [], []
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def expand_grid(algorithm: str, grid: dict[str, list] | None = None) -> list[ModelSpec]:
    grid = GRIDS[algorithm] if grid is None else grid
    names = list(grid)
    return [ModelSpec.of(algorithm, **dict(zip(names, values)))
            for values in itertools.product(*(grid[n] for n in names))]


def _cv_task(args):
    return cross_validate(*args)


def select_best(report: list[CvResult]) -> CvResult:
    """Highest mean F1, then lower F1 std, then earliest grid position."""
    usable = [(i, r) for i, r in enumerate(report) if r.ok]
    if not usable:
        raise ValueError("every grid point failed")
    return min(usable, key=lambda ir: (-ir[1].mean_f1, ir[1].std_f1, ir[0]))[1]


def grid_search(algorithm: str, data: LabeledSet, grid: dict[str, list] | None = None, k: int = 5,
                seed: int = 0, n_jobs: int = 1) -> tuple[CvResult, list[CvResult]]:
    specs = expand_grid(algorithm, grid)
    if not specs:
        raise ValueError("empty grid")
    folds = stratified_kfold(data.labels, k, seed)
    tasks = [(spec, data, folds, seed) for spec in specs]
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            report = list(pool.map(_cv_task, tasks))
    else:
        report = [_cv_task(t) for t in tasks]
    return select_best(report), report


REPORT_HEADER = ["algorithm", "params", "mean_f1", "std_f1", "mean_precision", "std_precision",
                 "mean_recall", "std_recall", "fold_f1", "error"]


def write_report(report: list[CvResult], path: str | Path, comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(REPORT_HEADER)
        for r in report:
            w.writerow([r.spec.algorithm, r.spec.label(), f"{r.mean_f1:.6f}", f"{r.std_f1:.6f}",
                        f"{r.mean_precision:.6f}", f"{r.std_precision:.6f}", f"{r.mean_recall:.6f}",
                        f"{r.std_recall:.6f}", ";".join(f"{v:.6f}" for v in r.f1), r.error or ""])


def _parse_value(text: str):
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_grid_file(path: str | Path) -> dict[str, dict[str, list]]:
    """Parse lines ``ALGO.param = v1, v2, ...``; ``ALGO =`` declares a parameter-free algorithm."""
    grids: dict[str, dict[str, list]] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = values'")
        key, values = (s.strip() for s in line.split("=", 1))
        algo, _, param = key.partition(".")
        if algo not in ALGORITHMS:
            raise ValueError(f"{path}:{lineno}: unknown algorithm {algo!r}")
        grid = grids.setdefault(algo, {})
        if param:
            parsed = [_parse_value(v) for v in values.split(",") if v.strip()]
            if not parsed:
                raise ValueError(f"{path}:{lineno}: no values for {key}")
            grid[param] = parsed
    return grids


def write_grid_file(path: str | Path, grids: dict[str, dict[str, list]] | None = None) -> None:
    grids = GRIDS if grids is None else grids
    lines = []
    for algo, grid in grids.items():
        if not grid:
            lines.append(f"{algo} =")
        for param, values in grid.items():
            lines.append(f"{algo}.{param} = " + ", ".join(str(v) for v in values))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_model(model: Classifier, path: str | Path) -> None:
    payload = pickle.dumps(model, protocol=4)
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC + MODEL_VERSION.to_bytes(2, "little") + payload)


def load_model(path: str | Path) -> Classifier:
    blob = Path(path).read_bytes()
    if not blob.startswith(MODEL_MAGIC):
        raise ValueError(f"{path}: not a model file")
    version = int.from_bytes(blob[len(MODEL_MAGIC):len(MODEL_MAGIC) + 2], "little")
    if version != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {version}")
    return pickle.loads(blob[len(MODEL_MAGIC) + 2:])
