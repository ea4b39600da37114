"""Website features: shop-word counts, TF.IDF scaling and matching-probability gating."""

from __future__ import annotations

import csv
import time
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from urllib.parse import urlparse

import numpy as np

SHOP_WORDS: tuple[str, ...] = ("winkel", "wagen", "mand", "shop", "cart", "bag", "basket", "warenkorb")
MATCH_THRESHOLD = 0.5
WEB_HEADER = ["company_id", *(f"tfidf_{w}" for w in SHOP_WORDS), "match_probability", "missing"]


@dataclass(frozen=True)
class ShopWordCounts:
    counts: tuple[int, ...]
    match_probability: float = 1.0
    fetched: bool = True


@dataclass(frozen=True)
class WebFeatures:
    tfidf: tuple[float, ...]
    match_probability: float
    missing: bool

    def as_row(self) -> list[float]:
        return [*self.tfidf, self.match_probability]


def decode_page(raw: bytes) -> str:
    return raw.decode("utf-8", errors="replace").lower()


def count_shop_words(page_text: str) -> tuple[int, ...]:
    """Case-insensitive substring counts of each shop word (non-overlapping, as str.count)."""
    text = page_text.lower()
    return tuple(text.count(w) for w in SHOP_WORDS)


def tfidf_transform(corpus: Sequence[Sequence[int]]) -> np.ndarray:
    """Max-normalised TF times ``log(1 + N/df)``, rescaled per document to [0, 1].

    One pseudo-document containing every word once is counted in ``N`` and
    every ``df`` so no idf is undefined; it is not returned.
    """
    counts = np.asarray(corpus, dtype=np.float64)
    if counts.ndim != 2 or counts.shape[0] == 0:
        raise ValueError("corpus must be a non-empty list of count vectors")
    if (counts < 0).any():
        raise ValueError("counts must be non-negative")
    n_docs = counts.shape[0] + 1
    df = (counts > 0).sum(axis=0) + 1
    idf = np.log1p(n_docs / df)
    peak = counts.max(axis=1, keepdims=True)
    tf = np.divide(counts, peak, out=np.zeros_like(counts), where=peak > 0)
    weights = tf * idf
    top = weights.max(axis=1, keepdims=True)
    return np.divide(weights, top, out=np.zeros_like(weights), where=top > 0)


def gate(features: Sequence[float], match_probability: float, fetched: bool = True,
         threshold: float = MATCH_THRESHOLD) -> WebFeatures:
    if not 0.0 <= match_probability <= 1.0:
        raise ValueError("match probability must lie in [0, 1]")
    missing = (not fetched) or match_probability < threshold
    return WebFeatures(tuple(float(v) for v in features), float(match_probability), missing)


def web_features(records: Mapping[str, ShopWordCounts], threshold: float = MATCH_THRESHOLD) -> dict[str, WebFeatures]:
    """Gate, then TF.IDF over the retained pages only; gated-out pages get zero vectors."""
    ids = sorted(records)
    kept = [cid for cid in ids
            if records[cid].fetched and records[cid].match_probability >= threshold]
    scaled = dict(zip(kept, tfidf_transform([records[c].counts for c in kept]))) if kept else {}
    zero = (0.0,) * len(SHOP_WORDS)
    out = {}
    for cid in ids:
        rec = records[cid]
        vec = scaled.get(cid, zero)
        out[cid] = gate(vec, rec.match_probability, rec.fetched, threshold)
    return out


def read_url_matches(path: str | Path) -> dict[str, tuple[str, float]]:
    out: dict[str, tuple[str, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        expected = ["company_id", "url", "match_probability"]
        if reader.fieldnames != expected:
            raise ValueError(f"{path}: expected header {expected}, got {reader.fieldnames}")
        for lineno, row in enumerate(reader, start=2):
            try:
                prob = float(row["match_probability"])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: match_probability {row['match_probability']!r} is not a number")
            if not 0.0 <= prob <= 1.0:
                raise ValueError(f"{path}:{lineno}: match_probability outside [0, 1]")
            if row["company_id"] in out:
                raise ValueError(f"{path}:{lineno}: duplicate company_id {row['company_id']}")
            out[row["company_id"]] = (row["url"], prob)
    return out


def counts_from_pages(url_matches: Mapping[str, tuple[str, float]], pages_dir: str | Path) -> dict[str, ShopWordCounts]:
    """Count shop words in ``<company_id>.html``; a missing file means the page was not fetched."""
    pages_dir = Path(pages_dir)
    out = {}
    for cid, (_, prob) in url_matches.items():
        page = pages_dir / f"{cid}.html"
        if page.is_file():
            out[cid] = ShopWordCounts(count_shop_words(decode_page(page.read_bytes())), prob, True)
        else:
            out[cid] = ShopWordCounts((0,) * len(SHOP_WORDS), prob, False)
    return out


def fetch_pages(url_matches: Mapping[str, tuple[str, float]], pages_dir: str | Path, max_in_flight: int = 4,
                timeout: float = 10.0, user_agent: str = "crossborder/0.1", host_delay: float = 1.0) -> dict[str, bool]:
    """Download each URL once into ``pages_dir``; returns company_id -> fetched."""
    pages_dir = Path(pages_dir)
    pages_dir.mkdir(parents=True, exist_ok=True)
    last_hit: dict[str, float] = {}

    def fetch(item: tuple[str, str]) -> tuple[str, bool]:
        cid, url = item
        target = pages_dir / f"{cid}.html"
        if target.exists():
            return cid, True
        host = urlparse(url).netloc
        wait = last_hit.get(host, 0.0) + host_delay - time.monotonic()
        if wait > 0:
            time.sleep(wait)
        last_hit[host] = time.monotonic()
        try:
            req = urllib.request.Request(url, headers={"User-Agent": user_agent})
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                target.write_bytes(resp.read())
            return cid, True
        except Exception:
            return cid, False

    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return dict(pool.map(fetch, ((cid, url) for cid, (url, _) in sorted(url_matches.items()) if url)))


def write_web_features(path: str | Path, features: Mapping[str, WebFeatures], header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(WEB_HEADER)
        for cid, feat in features.items():
            writer.writerow([cid, *(repr(v) for v in feat.tfidf), repr(feat.match_probability), int(feat.missing)])


def read_web_features(path: str | Path) -> dict[str, WebFeatures]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(rows)
        if header != WEB_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for row in rows:
            out[row[0]] = WebFeatures(tuple(float(v) for v in row[1:9]), float(row[9]), row[10] == "1")
    return out
