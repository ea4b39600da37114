"""Company-name cleaning, suffix tables and stemming.

A legal name is cleaned to lowercase alphanumerics separated by single
spaces, then split into a stem and the start of its business-entity
suffix ("acme trading ltd" -> ("acme trading", "ltd")).
"""

from __future__ import annotations

import csv
import io
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

# single-character folds that NFKD does not provide
_FOLD = str.maketrans({"ø": "o", "Ø": "O", "ł": "l", "Ł": "L", "đ": "d", "Đ": "D", "ı": "i", "ħ": "h", "Ħ": "H"})


class UnusableName(ValueError):
    """Raised when nothing alphanumeric survives cleaning."""


def fold_ascii(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text.translate(_FOLD))
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def clean_name(raw: str) -> str:
    """Lowercase, fold accents, map non-alphanumerics to spaces, collapse whitespace."""
    folded = fold_ascii(raw).lower()
    chars = [ch if ("a" <= ch <= "z" or "0" <= ch <= "9") else " " for ch in folded]
    cleaned = " ".join("".join(chars).split())
    if not cleaned:
        raise UnusableName(f"name {raw!r} is empty after cleaning")
    return cleaned


@dataclass(frozen=True)
class StemmedName:
    stem: str
    suffix_start: str = ""
    # the whole removed tail; begins with suffix_start
    suffix: str = ""


@dataclass
class SuffixTable:
    """Per-country suffix starts plus the known business-entity list.

    ``entries[country]`` is ordered: frequency-derived starts first (most
    common first), then known entity names and abbreviations.
    ``entities`` maps a cleaned entity name to its cleaned abbreviations and
    drives :func:`suffix_related`.
    """

    entries: dict[str, list[str]] = field(default_factory=dict)
    sources: dict[tuple[str, str], str] = field(default_factory=dict)
    entities: dict[str, set[str]] = field(default_factory=dict)
    max_words: int = 4

    def starts(self, country: str | None = None) -> list[str]:
        if country is not None:
            return list(self.entries.get(country, []))
        seen: dict[str, None] = {}
        for country_entries in self.entries.values():
            for entry in country_entries:
                seen.setdefault(entry, None)
        return list(seen)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["country", "suffix_start", "source"])
            for country in sorted(self.entries):
                for entry in self.entries[country]:
                    writer.writerow([country, entry, self.sources[(country, entry)]])

    @classmethod
    def from_csv(cls, path: str | Path, known_entities: Mapping[str, Iterable[tuple[str, Iterable[str]]]] | None = None,
                 max_words: int = 4) -> "SuffixTable":
        table = cls(max_words=max_words)
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                if row["source"] not in ("frequency", "known"):
                    raise ValueError(f"unknown suffix source {row['source']!r}")
                entry = clean_name(row["suffix_start"])
                table._add(row["country"], entry, row["source"])
        if known_entities is None:
            known_entities = load_known_entities()
        table.entities = entity_abbreviations(known_entities)
        return table

    def _add(self, country: str, entry: str, source: str) -> None:
        bucket = self.entries.setdefault(country, [])
        if entry not in bucket:
            bucket.append(entry)
            self.sources[(country, entry)] = source


def load_known_entities(path: str | Path | None = None) -> dict[str, list[tuple[str, list[str]]]]:
    """Read the country -> [(entity, [abbreviations])] list (shipped default if no path)."""
    if path is None:
        text = resources.files("crossborder").joinpath("data/known_entities.csv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    out: dict[str, list[tuple[str, list[str]]]] = defaultdict(list)
    for row in csv.DictReader(io.StringIO(text)):
        abbrevs = [clean_name(a) for a in row["abbreviations"].split("|") if a.strip()]
        out[row["country"]].append((clean_name(row["entity"]), abbrevs))
    return dict(out)


def entity_abbreviations(known_entities: Mapping[str, Iterable[tuple[str, Iterable[str]]]]) -> dict[str, set[str]]:
    mapping: dict[str, set[str]] = defaultdict(set)
    for items in known_entities.values():
        for entity, abbrevs in items:
            mapping[entity].update(abbrevs)
    return dict(mapping)


def _endings(words: list[str], max_words: int) -> Iterable[str]:
    # an ending never consumes the whole name
    for n in range(1, min(max_words, len(words) - 1) + 1):
        yield " ".join(words[-n:])


def reduce_to_starts(suffixes: list[str], anchors: set[str] = frozenset()) -> list[str]:
    """Replace each suffix by its shortest word-prefix that is itself a suffix or an anchor.

    Order of first appearance is preserved, so a frequency-ordered input
    yields frequency-ordered starts.
    """
    pool = set(suffixes) | set(anchors)
    starts: dict[str, None] = {}
    for suffix in suffixes:
        words = suffix.split()
        reduced = suffix
        for n in range(1, len(words)):
            prefix = " ".join(words[:n])
            if prefix in pool:
                reduced = prefix
                break
        starts.setdefault(reduced, None)
    return list(starts)


def build_suffix_table(register: Iterable[tuple[str, str]],
                       known_entities: Mapping[str, Iterable[tuple[str, Iterable[str]]]] | None = None,
                       max_words: int = 4, top_k_per_country: int = 50, min_count: int = 2) -> SuffixTable:
    """Build the suffix table from ``(raw_name, country)`` register pairs.

    An ending must occur at least ``min_count`` times in a country to count as common.
    """
    if max_words < 1:
        raise ValueError("max_words must be >= 1")
    if known_entities is None:
        known_entities = load_known_entities()
    counts: dict[str, Counter] = defaultdict(Counter)
    for raw, country in register:
        try:
            words = clean_name(raw).split()
        except UnusableName:
            continue
        counts[country].update(_endings(words, max_words))

    table = SuffixTable(max_words=max_words, entities=entity_abbreviations(known_entities))
    for country in sorted(set(counts) | set(known_entities)):
        known_forms: list[str] = []
        for entity, abbrevs in known_entities.get(country, []):
            for form in (entity, *abbrevs):
                if len(form.split()) <= max_words and form not in known_forms:
                    known_forms.append(form)
        # ties in frequency resolved alphabetically so the table is reproducible
        frequent = [kv for kv in counts[country].items() if kv[1] >= min_count]
        ranked = sorted(frequent, key=lambda kv: (-kv[1], kv[0]))[:top_k_per_country]
        for start in reduce_to_starts([s for s, _ in ranked], set(known_forms)):
            table._add(country, start, "frequency")
        for form in known_forms:
            table._add(country, form, "known")
    return table


def stem_name(name: str, table: SuffixTable, country: str | None = None) -> StemmedName:
    """Split the longest suffix that begins with a table entry off ``name``.

    The suffix may span at most ``table.max_words`` words and the stem is
    never left empty. Among entries starting at the same word, the longest
    entry wins, then table order.
    """
    words = name.split()
    starts = table.starts(country)
    by_first: dict[str, list[list[str]]] = defaultdict(list)
    for entry in starts:
        parts = entry.split()
        by_first[parts[0]].append(parts)
    for first in by_first:
        by_first[first].sort(key=len, reverse=True)  # stable: keeps table order on ties

    lo = max(1, len(words) - table.max_words)
    for pos in range(lo, len(words)):
        for parts in by_first.get(words[pos], ()):
            if words[pos:pos + len(parts)] == parts:
                return StemmedName(" ".join(words[:pos]), " ".join(parts), " ".join(words[pos:]))
    return StemmedName(name, "", "")


def _word_prefix(prefix: str, text: str) -> bool:
    return text == prefix or text.startswith(prefix + " ")


def suffix_related(a: str, b: str, abbreviation_map: Mapping[str, Iterable[str]]) -> bool:
    """True when one suffix start abbreviates an entity type the other one starts.

    Reflexive and symmetric; not transitive.
    """
    if a == b:
        return True
    for entity, abbrevs in abbreviation_map.items():
        abbrevs = set(abbrevs)
        if a in abbrevs and _word_prefix(b, entity):
            return True
        if b in abbrevs and _word_prefix(a, entity):
            return True
    return False
