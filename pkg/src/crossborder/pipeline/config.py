"""Flat key-value run configuration."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


DEFAULT_THRESHOLDS = {"Retail": 1e6, "Wholesale": 2e7, "Other": 5e7}


@dataclass
class RunConfig:
    # inputs
    tax_returns: str = "tax_returns.csv"
    register: str = "register.csv"
    labels: str = "labels.csv"
    url_matches: str = "url_matches.csv"
    pages_dir: str = "pages"
    # precomputed features skip the link / webfeat stages
    distance_features: str = ""
    web_features: str = ""
    use_web: bool = True
    output_dir: str = "out"
    years: tuple[int, ...] = ()
    seed: int = 0
    # linkage
    forest_trees: int = 8
    forest_hashes: int = 64
    candidates: int = 100
    min_stem_length: int = 3
    suffix_top_k: int = 50
    # web
    match_threshold: float = 0.5
    # classifiers: "ALGO key=value ..." or "grid" for the default grid search
    br_model: str = "RBFSVC C=100 gamma=1 class_weight=balanced"
    web_model: str = "RF n=200 d=1 class_weight=balanced"
    cv_folds: int = 5
    grid_file: str = ""
    # estimation
    lambda_tol: float = 1e-6
    lambda_max_iter: int = 100
    # reporting
    min_count: int = 20
    thresholds: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))

    def __post_init__(self):
        if self.forest_hashes % self.forest_trees:
            raise ConfigError("forest_hashes must be a multiple of forest_trees")
        if not 0.0 <= self.match_threshold <= 1.0:
            raise ConfigError("match_threshold must lie in [0, 1]")
        for key in ("candidates", "cv_folds", "lambda_max_iter", "min_count", "forest_trees"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be positive")
        if self.lambda_tol <= 0:
            raise ConfigError("lambda_tol must be positive")

    @classmethod
    def from_text(cls, text: str, base_dir: str | Path | None = None) -> "RunConfig":
        kinds = {f.name: f for f in fields(cls)}
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key.startswith("threshold."):
                values.setdefault("thresholds", dict(DEFAULT_THRESHOLDS))[key[len("threshold."):]] = _num(value, lineno)
                continue
            if key not in kinds:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            values[key] = _coerce(kinds[key].type, value, lineno)
        cfg = cls(**values)
        if base_dir is not None:
            cfg.resolve_paths(Path(base_dir))
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        return cls.from_text(path.read_text(encoding="utf-8"), base_dir=path.parent)

    def resolve_paths(self, base: Path) -> None:
        for key in ("tax_returns", "register", "labels", "url_matches", "pages_dir", "distance_features",
                    "web_features", "output_dir", "grid_file"):
            value = getattr(self, key)
            if value and not Path(value).is_absolute():
                setattr(self, key, str(base / value))

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "thresholds":
                lines += [f"threshold.{k} = {v:g}" for k, v in sorted(value.items())]
            elif isinstance(value, tuple):
                lines.append(f"{f.name} = " + ", ".join(str(v) for v in value))
            elif isinstance(value, bool):
                lines.append(f"{f.name} = {'true' if value else 'false'}")
            else:
                lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    def digest(self, keys: list[str] | None = None) -> str:
        """Short hash of the whole config, or of ``keys`` only."""
        data = asdict(self)
        if keys is not None:
            data = {k: data[k] for k in keys}
        return hashlib.sha256(json.dumps(data, sort_keys=True, default=list).encode()).hexdigest()[:16]


def _num(value: str, lineno: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: {value!r} is not a number") from None


def _coerce(kind, value: str, lineno: int):
    kind = str(kind)
    try:
        if kind == "bool":
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return value.lower() in ("true", "1", "yes")
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        if kind.startswith("tuple"):
            return tuple(int(v) for v in value.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot read {value!r} as {kind}") from None
    return value


def parse_model(text: str):
    """``"RF n=200 d=1"`` -> ModelSpec; numbers become int or float."""
    from ..mlkit import ModelSpec

    parts = text.split()
    if not parts:
        raise ConfigError("empty model description")
    params = {}
    for item in parts[1:]:
        if "=" not in item:
            raise ConfigError(f"bad model parameter {item!r}")
        k, v = item.split("=", 1)
        try:
            params[k] = int(v)
        except ValueError:
            try:
                params[k] = float(v)
            except ValueError:
                params[k] = v
    if "C" in params:
        params["C"] = float(params["C"])
    if "gamma" in params:
        params["gamma"] = float(params["gamma"])
    try:
        return ModelSpec.of(parts[0], **params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
