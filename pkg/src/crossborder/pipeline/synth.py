"""Synthetic tax filers, register, web pages and labels with known webshop status.

Misclassification is driven by two latent channel labels per company. The
register channel says "retail" with probability ``qB[s]`` and the website
channel says "shop" with probability ``qW[s]``; features are generated
cleanly from these latents, so trained classifiers recover them and the
combined prediction realizes the target error matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..linkage import FEATURE_HEADER
from ..normalize import load_known_entities
from ..strdist import METRICS
from ..webfeat import SHOP_WORDS, WEB_HEADER
from .ingest import Company
from .sampling import label_sample_select

REFERENCE_P = ((8 / 13, 5 / 13), (4 / 66, 62 / 66))
SYLLABLES = ("ka", "lo", "mi", "ne", "ro", "sa", "ti", "vu", "ber", "dan", "fel", "gor", "han", "jas", "kor",
             "lin", "mar", "nor", "pol", "ras", "sten", "tor", "ulm", "vik", "wen", "zor", "bri", "cla", "dro",
             "fra", "gri", "kle", "pra", "stra", "tre", "vel", "hof", "berg", "dal", "holm")
FILLER = ("trading", "group", "international", "home", "style", "design", "fashion", "sports", "garden", "tech")
PAGE_WORDS = ("about", "contact", "products", "company", "news", "service", "quality", "team", "history", "support")


@dataclass
class SyntheticSpec:
    n_companies: int = 10_000
    base_rate: float = 0.1
    years: tuple[int, ...] = (2014, 2015, 2016)
    turnover_mu: float = 10.8
    turnover_sigma: float = 2.0
    year_sigma: float = 0.2
    growth: float = 0.1
    zero_turnover_rate: float = 0.01
    industry_shares: dict[str, float] = field(default_factory=lambda: {"Retail": 0.6, "Wholesale": 0.2, "Other": 0.2})
    suffix_swap: float = 0.1
    char_edit: float = 0.1
    whitespace: float = 0.05
    target_P: tuple = REFERENCE_P
    web_missing: float = 0.3
    n_test: int = 2000
    distractors: int = 5000
    write_pages: bool = True

    def __post_init__(self):
        for name in ("suffix_swap", "char_edit", "whitespace", "web_missing", "zero_turnover_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.base_rate < 1.0:
            raise ValueError("base_rate must lie in (0, 1)")
        P = np.asarray(self.target_P, dtype=float)
        if P.shape != (2, 2) or not np.allclose(P.sum(axis=1), 1) or (P < 0).any():
            raise ValueError("target_P must be a 2x2 row-stochastic matrix")
        if self.web_missing >= 1.0:
            raise ValueError("web_missing must be below 1")


def channel_rates(P, web_missing: float) -> tuple[np.ndarray, np.ndarray]:
    """Latent positive rates (qB, qW) per true class so that combining both channels,
    with the web channel missing at rate ``web_missing``, predicts 1 with probability P[s, 0].

    Index 0 is the webshop class, 1 the non-webshop class.
    """
    P = np.asarray(P, dtype=float)
    p1 = P[:, 0]
    qW = np.sqrt(p1)
    qB = p1 / (web_missing + (1 - web_missing) * qW)
    qB = np.where(p1 > 0, qB, 0.0)
    return qB, qW


@dataclass
class SyntheticData:
    ids: list[str]
    names: list[str]
    countries: list[str]
    industries: list[str]
    turnover: np.ndarray  # companies x years
    years: tuple[int, ...]
    webshop: np.ndarray
    latent_br: np.ndarray
    latent_web: np.ndarray
    web_present: np.ndarray
    train: np.ndarray  # boolean masks
    test: np.ndarray
    register_names: list[str] = field(default_factory=list)
    register_countries: list[str] = field(default_factory=list)
    register_retail: list[int] = field(default_factory=list)
    register_of: dict[int, int] = field(default_factory=dict)  # company row -> register row

    def true_total(self, year: int) -> float:
        return float((self.turnover[:, self.years.index(year)] * self.webshop).sum())


def _stem(rng: np.random.Generator) -> str:
    words = []
    for _ in range(rng.integers(1, 3)):
        words.append("".join(rng.choice(SYLLABLES, size=rng.integers(2, 4))))
    if rng.random() < 0.4:
        words.append(str(rng.choice(FILLER)))
    return " ".join(words)


def _corrupt(stem: str, suffix: str, alt_suffix: str, spec: SyntheticSpec, rng: np.random.Generator) -> str:
    if rng.random() < spec.char_edit and len(stem) > 3:
        pos = int(rng.integers(1, len(stem) - 1))
        op = rng.integers(3)
        letter = chr(int(rng.integers(97, 123)))
        if op == 0:
            stem = stem[:pos] + letter + stem[pos + 1:]
        elif op == 1:
            stem = stem[:pos] + stem[pos + 1:]
        else:
            stem = stem[:pos] + letter + stem[pos:]
    if rng.random() < spec.whitespace:
        stem = stem.replace(" ", "", 1) if " " in stem else stem[:len(stem) // 2] + " " + stem[len(stem) // 2:]
    if rng.random() < spec.suffix_swap:
        suffix = alt_suffix
    return f"{stem} {suffix}".strip()


def synthesize(spec: SyntheticSpec, seed: int = 0) -> SyntheticData:
    rng = np.random.default_rng(seed)
    n = spec.n_companies
    entities = load_known_entities()
    countries = sorted(entities)
    ids = [f"C{i:06d}" for i in range(n)]

    webshop = (rng.random(n) < spec.base_rate).astype(int)
    qB, qW = channel_rates(spec.target_P, spec.web_missing)
    cls = 1 - webshop  # row index into P: 0 = webshop
    latent_br = (rng.random(n) < qB[cls]).astype(int)
    latent_web = (rng.random(n) < qW[cls]).astype(int)
    web_present = rng.random(n) >= spec.web_missing

    base = rng.lognormal(spec.turnover_mu, spec.turnover_sigma, n)
    base[rng.random(n) < spec.zero_turnover_rate] = 0.0
    turnover = np.empty((n, len(spec.years)))
    for t in range(len(spec.years)):
        turnover[:, t] = base * (1 + spec.growth) ** t * rng.lognormal(0.0, spec.year_sigma, n)
    inds = list(spec.industry_shares)
    shares = np.array([spec.industry_shares[k] for k in inds], dtype=float)
    industries = [inds[i] for i in rng.choice(len(inds), size=n, p=shares / shares.sum())]

    names, comp_countries, register_names, register_countries, register_retail = [], [], [], [], []
    register_of = {}
    for i in range(n):
        country = countries[int(rng.integers(len(countries)))]
        entity, abbrevs = entities[country][int(rng.integers(len(entities[country])))]
        forms = [entity, *abbrevs]
        suffix = forms[int(rng.integers(len(forms)))]
        alt = forms[int(rng.integers(len(forms)))]
        stem = _stem(rng)
        names.append(f"{stem} {suffix}")
        comp_countries.append(country)
        # every company has a register twin; its retail flag is the latent register channel
        register_of[i] = len(register_names)
        register_names.append(_corrupt(stem, suffix, alt, spec, rng))
        register_countries.append(country)
        register_retail.append(int(latent_br[i]))
    for _ in range(spec.distractors):
        country = countries[int(rng.integers(len(countries)))]
        entity, abbrevs = entities[country][int(rng.integers(len(entities[country])))]
        register_names.append(f"{_stem(rng)} {entity}")
        register_countries.append(country)
        register_retail.append(int(rng.random() < 0.5))

    train_ids = set(label_sample_select(
        Company(ids[i], names[i], industries[i], dict(zip(spec.years, turnover[i]))) for i in range(n)))
    train = np.array([cid in train_ids for cid in ids])
    rest = np.flatnonzero(~train)
    test = np.zeros(n, dtype=bool)
    test[rng.choice(rest, size=min(spec.n_test, len(rest)), replace=False)] = True

    return SyntheticData(ids, names, comp_countries, industries, turnover, tuple(spec.years), webshop, latent_br,
                         latent_web, web_present, train, test, register_names, register_countries,
                         register_retail, register_of)


def distance_feature_rows(data: SyntheticData, seed: int = 0) -> np.ndarray:
    """Fast-path distance features: small for register-retail latents, large otherwise."""
    rng = np.random.default_rng([seed, 1])
    n = len(data.ids)
    centre = np.where(data.latent_br == 1, rng.uniform(0.0, 0.25, n), rng.uniform(0.45, 0.95, n))
    noise = rng.normal(0.0, 0.03, (n, len(METRICS)))
    return np.clip(centre[:, None] + noise, 0.0, 1.0)


def web_feature_rows(data: SyntheticData, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Fast-path TF.IDF rows (scaled to a maximum of 1) and match probabilities."""
    rng = np.random.default_rng([seed, 2])
    n = len(data.ids)
    words = len(SHOP_WORDS)
    tfidf = np.where(data.latent_web[:, None] == 1, rng.uniform(0.3, 1.0, (n, words)), rng.uniform(0.0, 0.15, (n, words)))
    tfidf[np.arange(n), rng.integers(words, size=n)] = 1.0
    prob = np.where(data.web_present, rng.uniform(0.51, 1.0, n), rng.uniform(0.0, 0.49, n))
    tfidf[~data.web_present] = 0.0
    return tfidf, prob


def page_html(shop: bool, rng: np.random.Generator) -> str:
    body = list(rng.choice(PAGE_WORDS, size=60))
    hits = rng.integers(8, 25) if shop else rng.integers(0, 2)
    for _ in range(hits):
        body.insert(int(rng.integers(len(body) + 1)), str(rng.choice(SHOP_WORDS)))
    return "<html><body><p>" + " ".join(body) + "</p></body></html>\n"


def _writer(path: Path, header: list[str], comment: str | None):
    fh = open(path, "w", newline="", encoding="utf-8")
    if comment:
        fh.write(f"# {comment}\n")
    w = csv.writer(fh)
    w.writerow(header)
    return fh, w


def write_synthetic(data: SyntheticData, out_dir: str | Path, spec: SyntheticSpec, seed: int = 0,
                    features: bool = True) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    comment = f"synthetic seed={seed} n={spec.n_companies}"
    paths = {k: out / f"{k}.csv" for k in ("tax_returns", "register", "url_matches", "labels", "truth")}

    fh, w = _writer(paths["tax_returns"], ["company_id", "name", "industry_1974", "year", "turnover"], comment)
    with fh:
        for i, cid in enumerate(data.ids):
            for t, year in enumerate(data.years):
                w.writerow([cid, data.names[i], data.industries[i], year, f"{data.turnover[i, t]:.2f}"])
    fh, w = _writer(paths["register"], ["name", "country", "retail_flag"], comment)
    with fh:
        for row in zip(data.register_names, data.register_countries, data.register_retail):
            w.writerow(row)

    rng = np.random.default_rng([seed, 3])
    _, prob = web_feature_rows(data, seed)
    fh, w = _writer(paths["url_matches"], ["company_id", "url", "match_probability"], comment)
    with fh:
        for i, cid in enumerate(data.ids):
            w.writerow([cid, f"https://{cid.lower()}.example", f"{prob[i]:.4f}"])
    if spec.write_pages:
        pages = out / "pages"
        pages.mkdir(exist_ok=True)
        for i, cid in enumerate(data.ids):
            if data.web_present[i]:
                (pages / f"{cid}.html").write_text(page_html(bool(data.latent_web[i]), rng), encoding="utf-8")
        paths["pages"] = pages

    fh, w = _writer(paths["labels"], ["company_id", "label_br", "label_web", "split", "webshop"], comment)
    with fh:
        for i in np.flatnonzero(data.train | data.test):
            w.writerow([data.ids[i], data.latent_br[i], data.latent_web[i], "train" if data.train[i] else "test",
                        data.webshop[i]])
    fh, w = _writer(paths["truth"], ["company_id", "webshop", "latent_br", "latent_web"], comment)
    with fh:
        for i, cid in enumerate(data.ids):
            w.writerow([cid, data.webshop[i], data.latent_br[i], data.latent_web[i]])

    if features:
        dist = distance_feature_rows(data, seed)
        paths["distance_features"] = out / "distance_features.csv"
        fh, w = _writer(paths["distance_features"], FEATURE_HEADER, comment)
        with fh:
            for i, cid in enumerate(data.ids):
                w.writerow([cid, 0, *(f"{v:.6f}" for v in dist[i]), data.register_of[i]])
        tfidf, prob = web_feature_rows(data, seed)
        paths["web_features"] = out / "web_features.csv"
        fh, w = _writer(paths["web_features"], WEB_HEADER, comment)
        with fh:
            for i, cid in enumerate(data.ids):
                w.writerow([cid, *(f"{v:.6f}" for v in tfidf[i]), f"{prob[i]:.4f}", int(not data.web_present[i])])
    return paths
