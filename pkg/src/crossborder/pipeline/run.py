"""Stage runner: each stage is skipped when its config slice and input checksums are unchanged."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import estimator as est
from ..linkage import DistanceFeatures, index_register, link_batch, read_features, write_features
from ..mlkit import (ALGORITHMS, ConfusionCounts, LabeledSet, grid_search, load_model, read_grid_file, save_model,
                     train, write_report)
from ..mlkit.cv import GRIDS
from ..normalize import build_suffix_table, load_known_entities
from ..webfeat import WebFeatures, counts_from_pages, read_url_matches, read_web_features, web_features, \
    write_web_features
from .config import ConfigError, DataError, RunConfig, parse_model
from .ingest import read_labels, read_register, read_tax_returns
from .sampling import histogram_export, label_sample_select

log = logging.getLogger(__name__)

STAGES = ("link", "webfeat", "train", "classify", "estimate", "report")
STAGE_KEYS = {
    "link": ["distance_features", "forest_trees", "forest_hashes", "candidates", "min_stem_length", "suffix_top_k",
             "seed"],
    "webfeat": ["web_features", "use_web", "match_threshold"],
    "train": ["br_model", "web_model", "cv_folds", "seed", "use_web"],
    "classify": ["use_web"],
    "estimate": ["lambda_tol", "lambda_max_iter", "years"],
    "report": ["min_count", "thresholds", "years"],
}
STAGE_INPUTS = {
    "link": ["tax_returns", "register", "distance_features"],
    "webfeat": ["url_matches", "web_features"],
    "train": ["labels", "grid_file"],
    "classify": [],
    "estimate": ["tax_returns", "labels"],
    "report": ["tax_returns"],
}
STAGE_OUTPUTS = {
    "link": ["distance_features.csv"],
    "webfeat": ["web_features.csv"],
    "train": ["br.model", "web.model", "training.csv"],
    "classify": ["classifications.csv"],
    "estimate": ["error_matrix.csv", "estimates.csv", "coverage.csv"],
    "report": ["histogram.csv", "label_sample.csv", "summary.txt"],
}
UPSTREAM = {
    "link": [], "webfeat": [], "train": ["link", "webfeat"], "classify": ["link", "webfeat", "train"],
    "estimate": ["classify"], "report": ["estimate"],
}


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage, self.cause = stage, cause


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    path = Path(path)
    if path.is_dir():
        for child in sorted(path.rglob("*")):
            if child.is_file():
                h.update(str(child.relative_to(path)).encode())
                h.update(child.read_bytes())
    elif path.is_file():
        h.update(path.read_bytes())
    else:
        return "absent"
    return h.hexdigest()


@dataclass
class RunResult:
    ran: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    outputs: dict[str, Path] = field(default_factory=dict)


class OutputLock:
    def __init__(self, out_dir: Path):
        self.path = out_dir / ".lock"

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(f"{self.path} exists: another run owns this output directory") from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        return self

    def __exit__(self, *exc):
        self.path.unlink(missing_ok=True)


class Runner:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.cache_dir = self.out / ".cache"

    # bookkeeping -------------------------------------------------------
    def stage_key(self, stage: str) -> str:
        parts = {"config": self.cfg.digest(STAGE_KEYS[stage])}
        for name in STAGE_INPUTS[stage]:
            value = getattr(self.cfg, name)
            if name == "url_matches":
                parts["pages"] = file_digest(self.cfg.pages_dir) if self.cfg.use_web and not self.cfg.web_features else ""
            parts[name] = file_digest(value) if value else ""
        if stage == "webfeat" and not self.cfg.use_web:
            parts = {"config": parts["config"]}
        for up in UPSTREAM[stage]:
            for name in STAGE_OUTPUTS[up]:
                parts[f"{up}/{name}"] = file_digest(self.out / name)
        return hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).hexdigest()

    def header(self, stage: str) -> str:
        return f"config={self.cfg.digest(STAGE_KEYS[stage])} seed={self.cfg.seed} stage={stage}"

    def _cached(self, stage: str, key: str) -> bool:
        record = self.cache_dir / f"{stage}.json"
        if not record.is_file():
            return False
        saved = json.loads(record.read_text())
        if saved.get("key") != key:
            return False
        return all(file_digest(self.out / n) == saved["outputs"].get(n) for n in STAGE_OUTPUTS[stage])

    def _record(self, stage: str, key: str) -> None:
        outputs = {n: file_digest(self.out / n) for n in STAGE_OUTPUTS[stage]}
        (self.cache_dir / f"{stage}.json").write_text(json.dumps({"key": key, "outputs": outputs}, indent=1))

    def run(self, stages=STAGES, force: bool = False) -> RunResult:
        self.out.mkdir(parents=True, exist_ok=True)
        self.cache_dir.mkdir(exist_ok=True)
        result = RunResult()
        wanted = _with_upstream(stages)
        with OutputLock(self.out):
            for stage in STAGES:
                if stage not in wanted:
                    continue
                key = self.stage_key(stage)
                if not force and self._cached(stage, key):
                    result.skipped.append(stage)
                    log.info("stage %s unchanged, skipped", stage)
                    continue
                log.info("stage %s", stage)
                try:
                    getattr(self, f"stage_{stage}")()
                except (ConfigError, DataError, est.ConvergenceError):
                    raise
                except Exception as exc:
                    raise StageError(stage, exc) from exc
                self._record(stage, key)
                result.ran.append(stage)
        result.outputs = {n: self.out / n for s in wanted for n in STAGE_OUTPUTS[s]}
        return result

    # stages ------------------------------------------------------------
    def stage_link(self) -> None:
        cfg = self.cfg
        target = self.out / "distance_features.csv"
        if cfg.distance_features:
            feats = _load(read_features, cfg.distance_features)
        else:
            companies = read_tax_returns(cfg.tax_returns)
            register = read_register(cfg.register)
            table = build_suffix_table(((e.name, e.country) for e in register), load_known_entities(),
                                       top_k_per_country=cfg.suffix_top_k)
            retail = [(e.entry_id, e.name, e.country) for e in register if e.retail]
            index = index_register(retail, table, cfg.forest_trees, cfg.forest_hashes, cfg.seed)
            feats = link_batch(((c.company_id, c.name) for c in companies.values()), table, index,
                               cfg.candidates, cfg.min_stem_length)
        write_features(target, feats, self.header("link"))

    def stage_webfeat(self) -> None:
        cfg = self.cfg
        target = self.out / "web_features.csv"
        if not cfg.use_web:
            target.write_text(f"# {self.header('webfeat')}\n# web channel disabled\n", encoding="utf-8")
            return
        if cfg.web_features:
            feats = _load(read_web_features, cfg.web_features)
        else:
            if not Path(cfg.url_matches).is_file():
                raise ConfigError(f"web stage enabled but {cfg.url_matches} does not exist")
            if not Path(cfg.pages_dir).is_dir():
                raise ConfigError(f"web stage enabled but pages directory {cfg.pages_dir} does not exist")
            matches = _load(read_url_matches, cfg.url_matches)
            feats = web_features(counts_from_pages(matches, cfg.pages_dir), cfg.match_threshold)
        write_web_features(target, feats, self.header("webfeat"))

    def _features(self):
        dist = read_features(self.out / "distance_features.csv")
        web = read_web_features(self.out / "web_features.csv") if self.cfg.use_web else {}
        return dist, web

    def stage_train(self) -> None:
        cfg = self.cfg
        labels = read_labels(cfg.labels)
        dist, web = self._features()
        train_ids = sorted(cid for cid, lab in labels.items() if lab.split == "train")
        rows = []
        br_set = _labeled(train_ids, labels, "label_br", dist, _dist_row, "distance")
        br_model = self._fit("br", cfg.br_model, br_set)
        rows.append(["br", br_model.spec.algorithm, br_model.spec.label(), len(br_set), int(br_set.labels.sum())])
        save_model(br_model, self.out / "br.model")
        if cfg.use_web:
            web_set = _labeled(train_ids, labels, "label_web", web, _web_row, "web")
            web_model = self._fit("web", cfg.web_model, web_set)
            rows.append(["web", web_model.spec.algorithm, web_model.spec.label(), len(web_set),
                         int(web_set.labels.sum())])
            save_model(web_model, self.out / "web.model")
        else:
            (self.out / "web.model").write_bytes(b"")
        with open(self.out / "training.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {self.header('train')}\n")
            w = csv.writer(fh)
            w.writerow(["channel", "algorithm", "params", "rows", "positives"])
            w.writerows(rows)

    def _fit(self, channel: str, description: str, data: LabeledSet):
        cfg = self.cfg
        if description.strip() != "grid":
            model = train(parse_model(description), data, cfg.seed)
        else:
            grids = read_grid_file(cfg.grid_file) if cfg.grid_file else GRIDS
            best, full = None, []
            for algo in ALGORITHMS:
                if algo not in grids or (algo == "MNB" and data.kind == "distance"):
                    continue
                top, report = grid_search(algo, data, grids[algo], cfg.cv_folds, cfg.seed)
                full += report
                if best is None or top.mean_f1 > best.mean_f1:
                    best = top
            write_report(full, self.out / f"gridsearch_{channel}.csv", self.header("train"))
            model = train(best.spec, data, cfg.seed)
        model.provenance = self.header("train")
        return model

    def stage_classify(self) -> None:
        companies = read_tax_returns(self.cfg.tax_returns)
        dist, web = self._features()
        br_model = load_model(self.out / "br.model")
        web_model = load_model(self.out / "web.model") if self.cfg.use_web else None
        ids = sorted(companies)
        s_br = _predict(br_model, ids, dist, _dist_row)
        s_web = _predict(web_model, ids, web, _web_row) if web_model is not None else np.full(len(ids), -1)
        with open(self.out / "classifications.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {self.header('classify')}\n")
            w = csv.writer(fh)
            w.writerow(["company_id", "s_br", "s_web", "s_hat"])
            for cid, a, b in zip(ids, s_br, s_web):
                w.writerow([cid, int(a), int(b), est.combine(int(a), int(b))])

    def stage_estimate(self) -> None:
        cfg = self.cfg
        companies = read_tax_returns(cfg.tax_returns)
        labels = read_labels(cfg.labels)
        s_hat = read_classifications(self.out / "classifications.csv")
        test = [cid for cid, lab in labels.items() if lab.split == "test" and lab.webshop != -1
                and s_hat.get(cid, -1) != -1]
        counts = ConfusionCounts.from_labels([s_hat[c] for c in test], [labels[c].webshop for c in test])
        try:
            model = est.estimate_error_matrix(counts)
        except ValueError as exc:
            raise DataError(f"cannot estimate the error matrix from {len(test)} test companies: {exc}") from None
        with open(self.out / "error_matrix.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {self.header('estimate')}\n")
            w = csv.writer(fh)
            w.writerow(["tp", "fp", "tn", "fn", "p11", "p12", "p21", "p22"])
            w.writerow([counts.tp, counts.fp, counts.tn, counts.fn, *(f"{v:.6f}" for v in model.P.ravel())])

        manual = {cid for cid, lab in labels.items() if lab.split == "train"}
        for cid in manual:
            if labels[cid].webshop == -1:
                raise DataError(f"{cfg.labels}: manually labelled company {cid} has no webshop label")
        years = cfg.years or tuple(sorted({y for c in companies.values() for y in c.turnover}))
        results, coverage = [], []
        for year in years:
            y_M = sum(c.turnover.get(year, 0.0) for cid, c in companies.items()
                      if cid in manual and labels[cid].webshop == 1)
            rest = [cid for cid in sorted(companies) if cid not in manual and year in companies[cid].turnover]
            agg = est.aggregate([s_hat[c] for c in rest], [companies[c].turnover[year] for c in rest])
            results.append(est.estimate(y_M, model, agg, year, cfg.lambda_tol, cfg.lambda_max_iter))
            coverage.append([year, len(rest), agg.n_unclassified, f"{agg.unclassified_turnover:.0f}"])
        est.write_estimate_report(results, self.out / "estimates.csv", self.header("estimate"))
        with open(self.out / "coverage.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {self.header('estimate')}\n")
            w = csv.writer(fh)
            w.writerow(["year", "modelled_companies", "unclassified", "unclassified_turnover"])
            w.writerows(coverage)

    def stage_report(self) -> None:
        cfg = self.cfg
        companies = read_tax_returns(cfg.tax_returns)
        years = cfg.years or tuple(sorted({y for c in companies.values() for y in c.turnover}))
        latest = max(years)
        values = [c.turnover[latest] for c in companies.values() if latest in c.turnover]
        histogram_export(values, None, self.out / "histogram.csv", cfg.min_count, self.header("report"))
        selected = label_sample_select(companies.values(), cfg.thresholds)
        with open(self.out / "label_sample.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {self.header('report')}\n")
            w = csv.writer(fh)
            w.writerow(["company_id", "industry_1974", "max_turnover"])
            for cid in selected:
                c = companies[cid]
                w.writerow([cid, c.industry, f"{c.max_turnover:.0f}"])
        estimates = (self.out / "estimates.csv").read_text(encoding="utf-8").splitlines()
        lines = [f"# {self.header('report')}", f"companies: {len(companies)}",
                 f"selected for manual labelling: {len(selected)}", "", "estimates:"]
        lines += [f"  {line}" for line in estimates if not line.startswith("#")]
        (self.out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _with_upstream(stages) -> set[str]:
    wanted = set()
    todo = list(stages)
    while todo:
        s = todo.pop()
        if s not in STAGES:
            raise ConfigError(f"unknown stage {s!r}")
        if s not in wanted:
            wanted.add(s)
            todo += UPSTREAM[s]
    return wanted


def _load(reader, path):
    try:
        return reader(path)
    except FileNotFoundError:
        raise ConfigError(f"{path} does not exist") from None
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _dist_row(f: DistanceFeatures):
    return None if f.missing else list(f.values)


def _web_row(f: WebFeatures):
    return None if f.missing else [*f.tfidf, f.match_probability]


def _labeled(ids, labels, attr, feats, row_of, kind) -> LabeledSet:
    rows, ys, kept = [], [], []
    for cid in ids:
        y = getattr(labels[cid], attr)
        f = feats.get(cid)
        row = row_of(f) if f is not None else None
        if y == -1 or row is None:
            continue
        rows.append(row)
        ys.append(y)
        kept.append(cid)
    if not rows or len(set(ys)) < 2:
        raise DataError(f"training data for {attr} needs labelled companies of both classes")
    return LabeledSet(np.array(rows), np.array(ys), kept, kind)


def _predict(model, ids, feats, row_of) -> np.ndarray:
    out = np.full(len(ids), -1)
    rows, pos = [], []
    for i, cid in enumerate(ids):
        f = feats.get(cid)
        row = row_of(f) if f is not None else None
        if row is not None:
            rows.append(row)
            pos.append(i)
    if rows:
        out[pos] = model.predict(np.array(rows))
    return out


def read_classifications(path: str | Path) -> dict[str, int]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        return {row["company_id"]: int(row["s_hat"]) for row in reader}


def run(cfg: RunConfig, stages=STAGES, force: bool = False) -> RunResult:
    return Runner(cfg).run(stages, force)
