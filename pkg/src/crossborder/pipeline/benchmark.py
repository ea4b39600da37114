"""Seeded LSH recall benchmark: corrupted copies of indexed names as queries, brute force as the oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lshforest import build_forest, jaccard3, trigram_ids
from .synth import _stem


@dataclass(frozen=True)
class RecallResult:
    n_index: int
    n_queries: int
    partner_recall: float  # true partner in the top m
    nearest_recall: float  # a brute-force most similar stem in the top m
    min_similarity: float


def _edit(stem: str, rng: np.random.Generator) -> str:
    pos = int(rng.integers(0, len(stem)))
    letter = chr(int(rng.integers(97, 123)))
    op = rng.integers(3)
    if op == 0:
        return stem[:pos] + letter + stem[pos + 1:]
    if op == 1 and len(stem) > 1:
        return stem[:pos] + stem[pos + 1:]
    return stem[:pos] + letter + stem[pos:]


def benchmark_stems(n: int, rng: np.random.Generator) -> list[str]:
    stems: dict[str, None] = {}
    while len(stems) < n:
        stems.setdefault(_stem(rng), None)
    return list(stems)


def partner_queries(stems: list[str], n_queries: int, min_similarity: float,
                    rng: np.random.Generator) -> list[tuple[str, int]]:
    """Edited copies of random indexed stems whose trigram Jaccard similarity to the original stays high."""
    out = []
    for idx in rng.permutation(len(stems)):
        if len(out) == n_queries:
            break
        query = stems[idx]
        for _ in range(int(rng.integers(1, 3))):
            query = _edit(query, rng)
        if query != stems[idx] and jaccard3(query, stems[idx]) >= min_similarity:
            out.append((query, int(idx)))
    return out


def recall_benchmark(n_index: int = 10_000, n_queries: int = 1000, m: int = 100, min_similarity: float = 0.7,
                     l: int = 8, total_hashes: int = 64, seed: int = 0) -> RecallResult:
    rng = np.random.default_rng(seed)
    stems = benchmark_stems(n_index, rng)
    queries = partner_queries(stems, n_queries, min_similarity, rng)
    forest = build_forest(stems, l=l, total_hashes=total_hashes, seed=seed)
    order = {s: i for i, s in enumerate(forest.stems)}
    sets = [set(trigram_ids(s).tolist()) for s in stems]
    sizes = np.array([len(s) for s in sets])
    hit_partner = hit_nearest = 0
    for query, partner in queries:
        got = set(forest.query(query, m))
        hit_partner += order[stems[partner]] in got
        q = set(trigram_ids(query).tolist())
        inter = np.array([len(q & s) for s in sets])
        sim = inter / (len(q) + sizes - inter)
        best = {order[stems[i]] for i in np.flatnonzero(sim == sim.max())}
        hit_nearest += bool(best & got)
    n = len(queries)
    return RecallResult(len(stems), n, hit_partner / n, hit_nearest / n, min_similarity)
