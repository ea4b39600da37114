"""Tax-filer to business-register linkage: candidate retrieval and distance features."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .lshforest import LshForest, build_forest
from .normalize import StemmedName, SuffixTable, UnusableName, clean_name, stem_name, suffix_related
from .strdist import METRICS, Profile

MIN_STEM_LENGTH = 3
FEATURE_HEADER = ["company_id", "missing", *METRICS, "best_match_id"]


@dataclass(frozen=True)
class DistanceFeatures:
    values: tuple[float, ...] | None
    best_match: tuple[int, ...] | None = None  # register entry id per metric
    missing: bool = False

    @classmethod
    def absent(cls) -> "DistanceFeatures":
        return cls(None, None, True)


@dataclass
class RegisterIndex:
    """Stemmed retail entries of the business register plus the forest over their stems."""

    forest: LshForest
    stems: list[StemmedName]
    entry_ids: list[int]
    entities: dict[str, set[str]]
    # distinct stem -> positions in ``stems``
    by_stem: dict[str, list[int]] = field(default_factory=dict)
    _profiles: dict[str, Profile] = field(default_factory=dict, repr=False)
    _related: dict[tuple[str, str], bool] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.by_stem:
            for pos, st in enumerate(self.stems):
                self.by_stem.setdefault(st.stem, []).append(pos)

    def profile(self, stem: str) -> Profile:
        prof = self._profiles.get(stem)
        if prof is None:
            prof = self._profiles[stem] = Profile(stem)
        return prof

    def related(self, a: str, b: str) -> bool:
        if not a or not b:
            return True
        key = (a, b) if a <= b else (b, a)
        hit = self._related.get(key)
        if hit is None:
            hit = self._related[key] = suffix_related(a, b, self.entities)
        return hit


def index_register(entries: Iterable[tuple[int, str, str]], table: SuffixTable, l: int = 8,
                   total_hashes: int = 64, seed: int = 0, forest: LshForest | None = None) -> RegisterIndex:
    """Stem ``(entry_id, raw_name, country)`` entries and build (or attach) the forest."""
    stems: list[StemmedName] = []
    ids: list[int] = []
    for entry_id, raw, country in entries:
        try:
            cleaned = clean_name(raw)
        except UnusableName:
            continue
        stems.append(stem_name(cleaned, table, country))
        ids.append(entry_id)
    if forest is None:
        if not stems:
            raise ValueError("register has no usable names")
        forest = build_forest((s.stem for s in stems), l=l, total_hashes=total_hashes, seed=seed)
    return RegisterIndex(forest, stems, ids, table.entities)


def candidate_set(tax_stem: StemmedName, index: RegisterIndex | None, m: int = 100) -> list[tuple[str, int]]:
    """Top-m forest stems whose suffix class is compatible with the query's.

    Returns ``(register_stem, register_entry_id)`` pairs, one per distinct
    stem, in forest rank order; the entry id is the first compatible entry
    carrying that stem.
    """
    if index is None or len(index.forest) == 0:
        return []
    out = []
    for stem in index.forest.query_stems(tax_stem.stem, m):
        for pos in index.by_stem.get(stem, ()):
            if index.related(tax_stem.suffix_start, index.stems[pos].suffix_start):
                out.append((stem, index.entry_ids[pos]))
                break
    return out


def feature_vector(tax_stem: StemmedName, candidates: Sequence[tuple[str, int]] | Sequence[str],
                   index: RegisterIndex | None = None, min_stem_length: int = MIN_STEM_LENGTH) -> DistanceFeatures:
    """Per-metric minimum distance from the stem to the candidates."""
    if len(tax_stem.stem) < min_stem_length or not candidates:
        return DistanceFeatures.absent()
    query = Profile(tax_stem.stem)
    best = [2.0] * len(METRICS)
    arg = [-1] * len(METRICS)
    for pos, cand in enumerate(candidates):
        stem, entry_id = (cand, pos) if isinstance(cand, str) else cand
        prof = index.profile(stem) if index is not None else Profile(stem)
        for m, d in enumerate(query.distances(prof)):
            if d < best[m]:
                best[m] = d
                arg[m] = entry_id
    return DistanceFeatures(tuple(best), tuple(arg), False)


def link_one(raw_name: str, table: SuffixTable, index: RegisterIndex | None, m: int = 100,
             min_stem_length: int = MIN_STEM_LENGTH) -> DistanceFeatures:
    try:
        stemmed = stem_name(clean_name(raw_name), table)
    except UnusableName:
        return DistanceFeatures.absent()
    if len(stemmed.stem) < min_stem_length:
        return DistanceFeatures.absent()
    return feature_vector(stemmed, candidate_set(stemmed, index, m), index, min_stem_length)


def link_batch(companies: Iterable[tuple[str, str]], table: SuffixTable, index: RegisterIndex | None,
               m: int = 100, min_stem_length: int = MIN_STEM_LENGTH) -> dict[str, DistanceFeatures]:
    """Features for ``(company_id, raw_name)`` pairs, keyed and ordered by company id."""
    return {cid: link_one(name, table, index, m, min_stem_length) for cid, name in sorted(companies)}


def write_features(path: str | Path, features: dict[str, DistanceFeatures], header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(FEATURE_HEADER)
        for cid, feat in features.items():
            if feat.missing:
                writer.writerow([cid, 1, *[""] * len(METRICS), ""])
            else:
                writer.writerow([cid, 0, *(repr(v) for v in feat.values), feat.best_match[0]])


def read_features(path: str | Path) -> dict[str, DistanceFeatures]:
    out: dict[str, DistanceFeatures] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(rows)
        if header != FEATURE_HEADER:
            raise ValueError(f"{path}: unexpected feature header {header}")
        for row in rows:
            if row[1] == "1":
                out[row[0]] = DistanceFeatures.absent()
            else:
                best = int(row[-1])
                out[row[0]] = DistanceFeatures(tuple(float(v) for v in row[2:-1]), (best,) * len(METRICS), False)
    return out
