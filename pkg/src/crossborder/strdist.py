"""String distances in [0, 1] used as linkage features.

The metric order in :data:`METRICS` fixes the layout of every distance
feature vector.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Callable, Iterable, Sequence

METRICS: tuple[str, ...] = (
    "lev_norm",
    "jaro_winkler",
    "jaccard_1",
    "jaccard_2",
    "jaccard_3",
    "cosine_1",
    "cosine_2",
    "cosine_3",
)

WINKLER_SCALE = 0.1
WINKLER_MAX_PREFIX = 4


class NoCandidates(ValueError):
    pass


def ngram_counts(s: str, n: int) -> Counter:
    """Character n-gram frequencies; a string shorter than n is its own single gram."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(s) < n:
        return Counter([s])
    return Counter(s[i:i + n] for i in range(len(s) - n + 1))


def ngrams(s: str, n: int) -> set[str]:
    return set(ngram_counts(s, n))


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def lev_norm(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return levenshtein(a, b) / longest


def jaro(a: str, b: str) -> float:
    if a == b:
        return 1.0
    # greedy matching is order dependent; fix an order so the measure is symmetric
    if (len(a), a) > (len(b), b):
        a, b = b, a
    la, lb = len(a), len(b)
    if la == 0 or lb == 0:
        return 0.0
    window = max(la, lb) // 2 - 1
    window = max(window, 0)
    a_flags = [False] * la
    b_flags = [False] * lb
    matches = 0
    for i, ch in enumerate(a):
        lo, hi = max(0, i - window), min(lb, i + window + 1)
        for j in range(lo, hi):
            if not b_flags[j] and b[j] == ch:
                a_flags[i] = b_flags[j] = True
                matches += 1
                break
    if matches == 0:
        return 0.0
    half_transpositions = 0
    j = 0
    for i in range(la):
        if a_flags[i]:
            while not b_flags[j]:
                j += 1
            if a[i] != b[j]:
                half_transpositions += 1
            j += 1
    t = half_transpositions / 2
    return (matches / la + matches / lb + (matches - t) / matches) / 3


def jaro_winkler_similarity(a: str, b: str) -> float:
    sim = jaro(a, b)
    prefix = 0
    for ca, cb in zip(a[:WINKLER_MAX_PREFIX], b[:WINKLER_MAX_PREFIX]):
        if ca != cb:
            break
        prefix += 1
    return sim + prefix * WINKLER_SCALE * (1 - sim)


def jaro_winkler(a: str, b: str) -> float:
    return min(1.0, max(0.0, 1.0 - jaro_winkler_similarity(a, b)))


def jaccard_sets(x: set, y: set) -> float:
    union = len(x | y)
    if union == 0:
        return 0.0
    return 1.0 - len(x & y) / union


def cosine_counts(x: Counter, y: Counter) -> float:
    if not x and not y:
        return 0.0
    if not x or not y:
        return 1.0
    if x == y:
        return 0.0
    if len(x) > len(y):
        x, y = y, x
    dot = sum(v * y.get(k, 0) for k, v in x.items())
    norm = math.sqrt(sum(v * v for v in x.values())) * math.sqrt(sum(v * v for v in y.values()))
    return min(1.0, max(0.0, 1.0 - dot / norm))


def _jaccard(n: int) -> Callable[[str, str], float]:
    return lambda a, b: jaccard_sets(ngrams(a, n), ngrams(b, n))


def _cosine(n: int) -> Callable[[str, str], float]:
    return lambda a, b: cosine_counts(ngram_counts(a, n), ngram_counts(b, n))


_DISTANCES: dict[str, Callable[[str, str], float]] = {
    "lev_norm": lev_norm,
    "jaro_winkler": jaro_winkler,
    "jaccard_1": _jaccard(1),
    "jaccard_2": _jaccard(2),
    "jaccard_3": _jaccard(3),
    "cosine_1": _cosine(1),
    "cosine_2": _cosine(2),
    "cosine_3": _cosine(3),
}


def distance(metric: str, a: str, b: str) -> float:
    try:
        fn = _DISTANCES[metric]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}") from None
    return fn(a, b)


def min_distance_over(metric: str, a: str, candidates: Iterable[str]) -> tuple[float, str]:
    """Smallest distance from ``a`` to any candidate; ties go to the first candidate seen."""
    best: tuple[float, str] | None = None
    for cand in candidates:
        d = distance(metric, a, cand)
        if best is None or d < best[0]:
            best = (d, cand)
            if d == 0.0:
                break
    if best is None:
        raise NoCandidates("no candidates to compare against")
    return best


class Profile:
    """Precomputed n-gram sets and counts of one string, for repeated comparisons."""

    __slots__ = ("text", "sets", "counts", "norms")

    def __init__(self, text: str):
        self.text = text
        self.counts = [ngram_counts(text, n) for n in (1, 2, 3)]
        self.sets = [set(c) for c in self.counts]
        self.norms = [math.sqrt(sum(v * v for v in c.values())) for c in self.counts]

    def distances(self, other: "Profile") -> list[float]:
        """All eight distances to ``other`` in :data:`METRICS` order."""
        out = [lev_norm(self.text, other.text), jaro_winkler(self.text, other.text)]
        out.extend(jaccard_sets(x, y) for x, y in zip(self.sets, other.sets))
        for x, y, nx, ny in zip(self.counts, other.counts, self.norms, other.norms):
            if x == y:
                out.append(0.0)
                continue
            if len(x) > len(y):
                x, y = y, x
            dot = sum(v * y.get(k, 0) for k, v in x.items())
            out.append(min(1.0, max(0.0, 1.0 - dot / (nx * ny))))
        return out


def distance_vector(a: str, b: str) -> list[float]:
    return Profile(a).distances(Profile(b))


def min_distance_vector(a: str, candidates: Sequence[str]) -> tuple[list[float], list[int]]:
    """Per-metric minima over ``candidates`` with the index of an attaining candidate."""
    if not candidates:
        raise NoCandidates("no candidates to compare against")
    query = Profile(a)
    best = [2.0] * len(METRICS)
    arg = [0] * len(METRICS)
    for idx, cand in enumerate(candidates):
        for m, d in enumerate(query.distances(cand if isinstance(cand, Profile) else Profile(cand))):
            if d < best[m]:
                best[m] = d
                arg[m] = idx
    return best, arg
