"""Min-hash signatures over character trigrams and an LSH Forest index.

Each tree holds the ``k``-bit signatures of the indexed stems in sorted
order, which is the prefix tree flattened: every subtree is a contiguous
range, found by bisection on the signature prefix.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

ALPHABET = " 0123456789abcdefghijklmnopqrstuvwxyz"
N_TRIGRAMS = len(ALPHABET) ** 3  # 50,653
PRIME = 2_147_483_647  # 2**31 - 1

MAGIC = b"XBLSHF"
FORMAT_VERSION = 1
_HEADER = "<6sHqqqqqqq"

_CHAR_ID = {ch: i for i, ch in enumerate(ALPHABET)}


def trigram_id(gram: str) -> int:
    if len(gram) < 3:
        gram = gram.ljust(3)
    a, b, c = (_CHAR_ID[ch] for ch in gram)
    return (a * 37 + b) * 37 + c


def trigram_ids(stem: str) -> np.ndarray:
    """Sorted unique trigram ids; a stem shorter than 3 characters is one space-padded gram."""
    if len(stem) < 3:
        return np.array([trigram_id(stem)], dtype=np.int64)
    return np.unique(np.fromiter((trigram_id(stem[i:i + 3]) for i in range(len(stem) - 2)), dtype=np.int64))


@dataclass(frozen=True)
class HashFamily:
    """``k`` linear min-hash functions ``(a*x + b) mod p`` and ``k`` bit functions."""

    alpha: np.ndarray
    beta: np.ndarray
    g_alpha: np.ndarray
    g_beta: np.ndarray

    @classmethod
    def draw(cls, k: int, rng: np.random.Generator) -> "HashFamily":
        return cls(
            alpha=rng.integers(1, PRIME, size=k, dtype=np.int64),
            beta=rng.integers(0, PRIME, size=k, dtype=np.int64),
            g_alpha=rng.integers(1, PRIME, size=k, dtype=np.int64),
            g_beta=rng.integers(0, PRIME, size=k, dtype=np.int64),
        )

    @property
    def k(self) -> int:
        return len(self.alpha)

    def minhash(self, ids: np.ndarray) -> np.ndarray:
        """Pre-bit min-hash values, one per hash function."""
        return ((self.alpha[:, None] * ids[None, :] + self.beta[:, None]) % PRIME).min(axis=1)

    def bits(self, minima: np.ndarray) -> np.ndarray:
        return (((self.g_alpha * minima + self.g_beta) % PRIME) & 1).astype(np.uint8)


def minhash_signature(stem: str, hashes: HashFamily, k: int | None = None) -> np.ndarray:
    """The ``k``-bit signature of ``stem`` (all bits of ``hashes`` by default)."""
    bits = hashes.bits(hashes.minhash(trigram_ids(stem)))
    return bits if k is None else bits[:k]


def _pack(bits: np.ndarray) -> np.ndarray:
    """Rows of bits (MSB first) to unsigned integers."""
    k = bits.shape[1]
    weights = (1 << np.arange(k - 1, -1, -1)).astype(np.uint64)
    return (bits.astype(np.uint64) * weights).sum(axis=1)


def _lcp(query: int, keys: np.ndarray, k: int) -> np.ndarray:
    """Shared-prefix length between one k-bit key and many."""
    diff = np.bitwise_xor(keys, np.uint64(query))
    # bit_length of diff, vectorised; exact because keys stay below 2**52
    length = np.zeros(diff.shape, dtype=np.int64)
    nz = diff > 0
    length[nz] = np.floor(np.log2(diff[nz].astype(np.float64))).astype(np.int64) + 1
    return k - length


@dataclass
class LshTree:
    hashes: HashFamily
    depth: int
    keys: np.ndarray  # sorted packed signatures (depth bits)
    items: np.ndarray  # item index per key, aligned with keys
    full_keys: np.ndarray  # packed depth-bit signature per item, indexed by item

    def prefix_range(self, key: int, d: int) -> tuple[int, int]:
        """Slice of ``keys`` sharing the first ``d`` bits of ``key``."""
        shift = self.depth - d
        lo = (key >> shift) << shift
        hi = lo + (1 << shift)
        return (int(np.searchsorted(self.keys, np.uint64(lo), "left")),
                int(np.searchsorted(self.keys, np.uint64(hi), "left")))


@dataclass
class LshForest:
    trees: list[LshTree]
    stems: list[str]
    multiplicity: list[int]
    seed: int
    total_hashes: int
    max_depth: int
    pool_factor: int = 10
    _lookup: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._lookup = {s: i for i, s in enumerate(self.stems)}

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def __len__(self) -> int:
        return len(self.stems)

    def index_of(self, stem: str) -> int | None:
        return self._lookup.get(stem)

    def signature_keys(self, stem: str) -> list[int]:
        ids = trigram_ids(stem)
        keys = []
        for tree in self.trees:
            bits = tree.hashes.bits(tree.hashes.minhash(ids))[: tree.depth]
            keys.append(int(_pack(bits[None, :])[0]))
        return keys

    def query(self, stem: str, m: int = 100) -> list[int]:
        """Indices of up to ``m`` indexed stems, most similar first.

        All trees are ascended in lockstep from the deepest shared prefix
        until the pool holds ``pool_factor * m`` stems (or the whole
        index); the pool is then ranked by the total shared-prefix depth
        over all trees, then deepest single-tree prefix, then order of
        discovery. An indexed stem equal to the query always ranks first.
        """
        if m < 1:
            raise ValueError("m must be >= 1")
        n = len(self.stems)
        target = min(n, self.pool_factor * m)
        keys = self.signature_keys(stem)
        seen: dict[int, int] = {}  # item -> discovery rank
        depth = self.max_depth
        while depth >= 0 and len(seen) < target:
            for tree, key in zip(self.trees, keys):
                if depth > tree.depth:
                    continue
                lo, hi = tree.prefix_range(key, depth)
                for item in tree.items[lo:hi].tolist():
                    if item not in seen:
                        seen[item] = len(seen)
            depth -= 1
        pool = np.fromiter(seen, dtype=np.int64, count=len(seen))
        if len(pool) == 0:
            return []
        total = np.zeros(len(pool), dtype=np.int64)
        deepest = np.zeros(len(pool), dtype=np.int64)
        for tree, key in zip(self.trees, keys):
            lcp = _lcp(key, tree.full_keys[pool], tree.depth)
            total += lcp
            np.maximum(deepest, lcp, out=deepest)
        exact = (pool == self._lookup.get(stem, -1)).astype(np.int64)
        order = np.lexsort((np.arange(len(pool)), -deepest, -total, -exact))
        return pool[order[:m]].tolist()

    def query_stems(self, stem: str, m: int = 100) -> list[str]:
        return [self.stems[i] for i in self.query(stem, m)]

    # serialisation -------------------------------------------------------
    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.write_bytes(self.to_bytes())

    def to_bytes(self) -> bytes:
        stems = "\n".join(self.stems).encode("utf-8")
        parts = [struct.pack(_HEADER, MAGIC, FORMAT_VERSION, self.seed, self.total_hashes, self.n_trees,
                             self.max_depth, self.pool_factor, len(self.stems), len(stems)), stems,
                 np.asarray(self.multiplicity, dtype="<i8").tobytes()]
        for tree in self.trees:
            parts.append(struct.pack("<q", tree.depth))
            for arr in (tree.hashes.alpha, tree.hashes.beta, tree.hashes.g_alpha, tree.hashes.g_beta):
                parts.append(np.asarray(arr, dtype="<i8").tobytes())
            parts.append(np.asarray(tree.full_keys, dtype="<u8").tobytes())
        return b"".join(parts)

    @classmethod
    def load(cls, path: str | Path) -> "LshForest":
        return cls.from_bytes(Path(path).read_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "LshForest":
        size = struct.calcsize(_HEADER)
        if len(data) < size or data[:len(MAGIC)] != MAGIC:
            raise ValueError("not an LSH forest file")
        magic, version, seed, total, n_trees, max_depth, pool_factor, n, n_stem_bytes = struct.unpack(
            _HEADER, data[:size])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported forest format version {version}")
        pos = size
        blob = data[pos:pos + n_stem_bytes].decode("utf-8")
        pos += n_stem_bytes
        stems = blob.split("\n") if n else []
        multiplicity = np.frombuffer(data, dtype="<i8", count=n, offset=pos).tolist()
        pos += 8 * n
        trees = []
        for _ in range(n_trees):
            (depth,) = struct.unpack("<q", data[pos:pos + 8])
            pos += 8
            arrs = []
            for _ in range(4):
                arrs.append(np.frombuffer(data, dtype="<i8", count=depth, offset=pos).astype(np.int64))
                pos += 8 * depth
            keys = np.frombuffer(data, dtype="<u8", count=n, offset=pos).astype(np.uint64)
            pos += 8 * n
            trees.append(_make_tree(HashFamily(*arrs), depth, keys))
        return cls(trees, stems, multiplicity, seed, total, max_depth, pool_factor)

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


def _make_tree(hashes: HashFamily, depth: int, full_keys: np.ndarray) -> LshTree:
    order = np.argsort(full_keys, kind="stable")
    return LshTree(hashes, depth, full_keys[order], order.astype(np.int64), full_keys)


def _signature_matrix(id_lists: Sequence[np.ndarray], hashes: HashFamily, chunk: int = 4096) -> np.ndarray:
    """Bits for many stems at once: shape (n_stems, k)."""
    out = np.empty((len(id_lists), hashes.k), dtype=np.uint8)
    for start in range(0, len(id_lists), chunk):
        block = id_lists[start:start + chunk]
        lengths = np.fromiter((len(v) for v in block), dtype=np.int64, count=len(block))
        flat = np.concatenate(block)
        offsets = np.concatenate(([0], np.cumsum(lengths)[:-1]))
        hashed = (hashes.alpha[:, None] * flat[None, :] + hashes.beta[:, None]) % PRIME
        minima = np.minimum.reduceat(hashed, offsets, axis=1)
        bits = ((hashes.g_alpha[:, None] * minima + hashes.g_beta[:, None]) % PRIME) & 1
        out[start:start + len(block)] = bits.T
    return out


def _unique_depth(keys_full: np.ndarray, k_max: int) -> int:
    """Smallest k <= k_max giving every stem a distinct k-bit prefix (k_max if impossible)."""
    if len(keys_full) <= 1:
        return 1
    for k in range(1, k_max + 1):
        prefixes = keys_full >> np.uint64(k_max - k)
        if len(np.unique(prefixes)) == len(prefixes):
            return k
    return k_max


def build_forest(stems: Iterable[str], l: int = 8, total_hashes: int = 64, seed: int = 0,
                 pool_factor: int = 10) -> LshForest:
    """Index ``stems`` in ``l`` trees of ``total_hashes // l`` bits each.

    Duplicate stems are indexed once; ``multiplicity`` records how often
    each distinct stem was supplied.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    if total_hashes % l:
        raise ValueError("total_hashes must be divisible by l")
    k_max = total_hashes // l
    if k_max > 52:
        raise ValueError("at most 52 bits per tree are supported")
    counts: dict[str, int] = {}
    for s in stems:
        counts[s] = counts.get(s, 0) + 1
    if not counts:
        raise ValueError("cannot index an empty collection of stems")
    distinct = list(counts)
    id_lists = [trigram_ids(s) for s in distinct]

    seeds = np.random.SeedSequence(seed).spawn(l)
    trees = []
    for tree_seed in seeds:
        hashes = HashFamily.draw(k_max, np.random.default_rng(tree_seed))
        full = _pack(_signature_matrix(id_lists, hashes))
        depth = _unique_depth(full, k_max)
        keys = full >> np.uint64(k_max - depth)
        trees.append(_make_tree(HashFamily(hashes.alpha[:depth], hashes.beta[:depth],
                                           hashes.g_alpha[:depth], hashes.g_beta[:depth]), depth, keys))
    return LshForest(trees, distinct, [counts[s] for s in distinct], seed, total_hashes, k_max, pool_factor)


def jaccard3(a: str, b: str) -> float:
    """Trigram Jaccard similarity on the id sets used for hashing."""
    x, y = set(trigram_ids(a).tolist()), set(trigram_ids(b).tolist())
    return len(x & y) / len(x | y)
