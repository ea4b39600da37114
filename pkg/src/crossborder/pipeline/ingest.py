"""CSV readers with schema validation; errors name file, line and column."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .config import DataError

TAX_COLUMNS = ["company_id", "name", "industry_1974", "year", "turnover"]
REGISTER_COLUMNS = ["name", "country", "retail_flag"]
LABEL_COLUMNS = ["company_id", "label_br", "label_web"]
LABEL_OPTIONAL = ["split", "webshop"]


@dataclass
class Company:
    company_id: str
    name: str
    industry: str
    turnover: dict[int, float] = field(default_factory=dict)

    @property
    def max_turnover(self) -> float:
        return max(self.turnover.values()) if self.turnover else 0.0


@dataclass(frozen=True)
class RegisterEntry:
    entry_id: int
    name: str
    country: str
    retail: bool


@dataclass(frozen=True)
class Label:
    company_id: str
    label_br: int
    label_web: int
    split: str = "train"
    webshop: int = -1


def _rows(path: str | Path, columns: list[str], optional: list[str] = ()):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8") as fh:
        lines = (line for line in fh if not line.startswith("#"))
        reader = csv.reader(lines)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}:1: empty file") from None
        allowed = columns + [c for c in optional if c in header]
        if header[:len(columns)] != columns or header != allowed:
            raise DataError(f"{path}:1: expected columns {columns + list(optional)}, got {header}")
        for row in reader:
            lineno = reader.line_num + _comment_offset(path, reader.line_num)
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            yield lineno, dict(zip(header, row))


_comment_cache: dict[str, list[int]] = {}


def _comment_offset(path: Path, logical_line: int) -> int:
    """Number of ``#`` lines before the ``logical_line``-th non-comment line."""
    key = str(path)
    if key not in _comment_cache:
        positions = []
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh, 1):
                if not line.startswith("#"):
                    positions.append(i)
        _comment_cache[key] = positions
    positions = _comment_cache[key]
    return positions[logical_line - 1] - logical_line if logical_line <= len(positions) else 0


def _field(path, lineno, row, column, cast: Callable, check: Callable | None = None, what: str = ""):
    raw = row[column]
    try:
        value = cast(raw)
    except ValueError:
        raise DataError(f"{path}:{lineno}: column {column}: cannot parse {raw!r}") from None
    if check is not None and not check(value):
        raise DataError(f"{path}:{lineno}: column {column}: {raw!r} {what}")
    return value


def _label(v: int) -> bool:
    return v in (-1, 0, 1)


def read_tax_returns(path: str | Path) -> dict[str, Company]:
    _comment_cache.pop(str(path), None)
    companies: dict[str, Company] = {}
    for lineno, row in _rows(path, TAX_COLUMNS):
        cid = row["company_id"].strip()
        if not cid:
            raise DataError(f"{path}:{lineno}: column company_id: empty")
        year = _field(path, lineno, row, "year", int)
        turnover = _field(path, lineno, row, "turnover", float, math.isfinite, "is not finite")
        comp = companies.get(cid)
        if comp is None:
            comp = companies[cid] = Company(cid, row["name"], row["industry_1974"].strip())
        elif comp.name != row["name"]:
            raise DataError(f"{path}:{lineno}: column name: company {cid} has conflicting names")
        if year in comp.turnover:
            raise DataError(f"{path}:{lineno}: column company_id: duplicate company {cid} for year {year}")
        comp.turnover[year] = turnover
    return companies


def read_register(path: str | Path) -> list[RegisterEntry]:
    _comment_cache.pop(str(path), None)
    out = []
    for lineno, row in _rows(path, REGISTER_COLUMNS):
        flag = _field(path, lineno, row, "retail_flag", int, lambda v: v in (0, 1), "must be 0 or 1")
        out.append(RegisterEntry(len(out), row["name"], row["country"].strip().upper(), bool(flag)))
    return out


def read_labels(path: str | Path) -> dict[str, Label]:
    _comment_cache.pop(str(path), None)
    out: dict[str, Label] = {}
    for lineno, row in _rows(path, LABEL_COLUMNS, LABEL_OPTIONAL):
        cid = row["company_id"].strip()
        if cid in out:
            raise DataError(f"{path}:{lineno}: column company_id: duplicate company {cid}")
        br = _field(path, lineno, row, "label_br", int, _label, "must be -1, 0 or 1")
        web = _field(path, lineno, row, "label_web", int, _label, "must be -1, 0 or 1")
        split = row.get("split", "train").strip() or "train"
        if split not in ("train", "test"):
            raise DataError(f"{path}:{lineno}: column split: {split!r} must be train or test")
        if "webshop" in row and row["webshop"].strip() != "":
            truth = _field(path, lineno, row, "webshop", int, _label, "must be -1, 0 or 1")
        else:
            truth = web if web != -1 else br
        out[cid] = Label(cid, br, web, split, truth)
    return out


@dataclass
class Datasets:
    companies: dict[str, Company]
    labels: dict[str, Label]
    register: list[RegisterEntry] | None = None
    url_matches: dict[str, tuple[str, float]] | None = None

    def summary(self) -> str:
        parts = [f"{len(self.companies)} companies", f"{len(self.labels)} labels"]
        if self.register is not None:
            parts.append(f"{len(self.register)} register entries")
        if self.url_matches is not None:
            parts.append(f"{len(self.url_matches)} url matches")
        return ", ".join(parts)


def ingest(cfg, need_register: bool = True, need_urls: bool = True) -> Datasets:
    from ..webfeat import read_url_matches

    companies = read_tax_returns(cfg.tax_returns)
    labels = read_labels(cfg.labels)
    unknown = sorted(set(labels) - set(companies))
    if unknown:
        raise DataError(f"{cfg.labels}: labels for unknown companies, e.g. {unknown[0]}")
    register = read_register(cfg.register) if need_register else None
    urls = None
    if need_urls:
        try:
            urls = read_url_matches(cfg.url_matches)
        except FileNotFoundError:
            raise DataError(f"{cfg.url_matches}: file not found") from None
        except ValueError as exc:
            raise DataError(str(exc)) from None
    return Datasets(companies, labels, register, urls)
