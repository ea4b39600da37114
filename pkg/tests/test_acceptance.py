"""Acceptance criteria 1-12, each with an independent oracle where one applies."""

import csv
import functools
import itertools
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crossborder.estimator import (ErrorModel, combine, corrected_estimate, estimate_error_matrix, optimize_lambda)
from crossborder.lshforest import ALPHABET, HashFamily, trigram_ids
from crossborder.mlkit import (ALGORITHMS, ConfusionCounts, LabeledSet, ModelSpec, grid_search, precision_recall_f1,
                               scores, stratified_kfold, train)
from crossborder.pipeline.benchmark import recall_benchmark
from crossborder.pipeline.sampling import histogram_export
from crossborder.pipeline.simulate import replicate
from crossborder.pipeline.synth import REFERENCE_P, SyntheticSpec
from crossborder.strdist import METRICS, distance, distance_vector, lev_norm

# published error matrix (webshop first) and the final-results rows: year, y_M, y_hat, bias, y, std
P_PUBLISHED = np.array([[0.615, 0.385], [0.061, 0.939]])
PUBLISHED_ROWS = [(2014, 405, 495, 63, 837, 97), (2015, 565, 586, 21, 1132, 101), (2016, 725, 667, 19, 1372, 110)]
PUBLISHED_SLACK = {2014: 1, 2015: 2, 2016: 1}


# 1 ---------------------------------------------------------------------------

def test_01_error_matrix_spot_check(acceptance):
    counts = ConfusionCounts(tp=8, fp=4, tn=62, fn=5)
    model = estimate_error_matrix(counts)
    timings = []
    for _ in range(200):
        t = time.perf_counter()
        estimate_error_matrix(counts)
        timings.append(time.perf_counter() - t)
    ok = np.array_equal(np.round(model.P, 3), P_PUBLISHED) and min(timings) < 1e-3
    acceptance(1, ok, f"P={np.round(model.P, 3).tolist()}, {min(timings) * 1e6:.0f} us")
    assert ok


# 2 ---------------------------------------------------------------------------

def test_02_table5_accounting_identity(acceptance):
    model = ErrorModel(P_PUBLISHED)
    worst = 0.0
    for year, y_M, y_hat, bias, y, _ in PUBLISHED_ROWS:
        res = corrected_estimate(y_M, model, [y_hat, 4000.0], [1.0, 1.0], 0.0, [bias, -bias], year=year)
        worst = max(worst, abs(res.y_final - y) - PUBLISHED_SLACK[year])
        assert abs(res.y_final - y) <= PUBLISHED_SLACK[year]
    acceptance(2, worst <= 0, "y_M + y_hat - B within rounding for 2014-2016")


# 3 ---------------------------------------------------------------------------

def bootstrap_monte_carlo(P, sizes, counts, classes, R, rng):
    """Explicit bootstrap replications of (y*_1, y*_2).

    Companies come in groups of equal turnover; within a group the number
    that end up predicted as webshops after independent per-company
    reclassification with the rates of P is a binomial draw.
    """
    to_shop = np.where(classes == 1, P[0, 0], P[1, 0])
    shops = rng.binomial(counts[None, :], to_shop[None, :], size=(R, len(counts)))
    y1 = shops @ sizes
    return np.column_stack([y1, (counts * sizes).sum() - y1])


def random_instance(rng):
    a, b = rng.uniform(0.5, 0.98), rng.uniform(0.02, 0.4)
    groups = int(rng.integers(2, 7))
    classes = np.r_[1, 0, rng.integers(0, 2, groups - 2)]
    sizes = rng.lognormal(10, 1.5, groups)
    counts = np.exp(rng.uniform(np.log(1e5), np.log(1e7), groups)).astype(np.int64)
    y_hat = np.array([(counts * sizes)[classes == 1].sum(), (counts * sizes)[classes == 0].sum()])
    k_hat = np.array([(counts * sizes ** 2)[classes == 1].sum(), (counts * sizes ** 2)[classes == 0].sum()])
    return np.array([[a, 1 - a], [b, 1 - b]]), sizes, counts, classes, y_hat, k_hat


def test_03_bootstrap_oracle(acceptance):
    from crossborder.estimator import bootstrap_moments

    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst, checked = 0.0, 0
    for _ in range(20):
        P, sizes, counts, classes, y_hat, k_hat = random_instance(rng)
        model = ErrorModel(P)
        B, V = bootstrap_moments(model, y_hat, k_hat)
        reps = bootstrap_monte_carlo(P, sizes, counts, classes, 200_000, rng)
        B_mc = reps.mean(axis=0) - y_hat
        V_mc = np.cov(reps.T, ddof=1)
        # second bootstrap: z* = Q y*, its bias taken relative to Q y_hat
        B1_mc = (reps @ model.Q.T).mean(axis=0) - model.Q @ y_hat
        total, total_sq = y_hat.sum(), k_hat.sum()
        for exact, mc, scale in [(B, B_mc, total), (model.Q @ B, B1_mc, total), (V, V_mc, total_sq)]:
            exact, mc = np.ravel(exact), np.ravel(mc)
            big = np.abs(exact) >= 1e-3 * scale
            checked += int(big.sum())
            if big.any():
                worst = max(worst, float(np.max(np.abs(mc[big] - exact[big]) / np.abs(exact[big]))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.01 and elapsed < 120
    acceptance(3, ok, f"max relative error {worst:.4f} on {checked} components of 20 instances, {elapsed:.0f} s")
    assert ok


# 4 ---------------------------------------------------------------------------

def oracle_lambda(P, y_hat, k_hat):
    """Grid-scan the fixed point of 'lambda minimises mse given B_lambda', written out from scratch."""
    Pt = P.T
    Q = np.linalg.inv(Pt)
    D = Pt - np.eye(2)
    omega = np.diag(Pt @ k_hat) - Pt @ np.diag(k_hat) @ P
    S = D @ omega @ D.T
    B0 = D @ y_hat
    grid = np.linspace(0.0, 1.0, 1001)

    # mse[lam, mu]: squared bias of B_mu given B_lam, plus the variance term in mu
    M = (1 - grid)[:, None, None] * np.eye(2) + grid[:, None, None] * Q
    variance = np.einsum("j,mkj,mk->m", S[0], M, M[:, :, 0])[None, :]
    B = (1 - grid)[:, None] * B0 + grid[:, None] * (Q @ B0)
    bias_sq = ((1 - grid) ** 2)[None, :] * ((B @ D.T)[:, 0] ** 2)[:, None]
    best_mu = grid[np.argmin(bias_sq + variance, axis=1)]
    gap = np.abs(best_mu - grid)
    return float(grid[int(np.argmin(gap))]), float(gap.min())


def published_instance(year_row, P):
    """Confidential inputs reconstructed so that the published bias and std are reproduced at lambda = 0."""
    _, _, y1, bias, _, std = year_row
    a, b = P[0, 0], P[1, 0]
    y2 = (bias + (1 - a) * y1) / b
    c = (std / (2 - a + b)) ** 2
    k1 = y1 ** 2 / 20
    k2 = (c - a * (1 - a) * k1) / (b * (1 - b))
    assert k2 > 0
    return np.array([y1, y2]), np.array([k1, k2])


def test_04_lambda_grid_oracle(acceptance):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst, interior = 0.0, 0
    for _ in range(50):
        a, b = rng.uniform(0.4, 0.98), rng.uniform(0.01, 0.35)
        P = np.array([[a, 1 - a], [b, 1 - b]])
        y_hat = rng.lognormal(13, 1.5, 2)
        k_hat = y_hat ** 2 / rng.uniform(2, 300, 2)
        fit = optimize_lambda(ErrorModel(P), y_hat, k_hat, tol=1e-9, max_iter=10_000)
        lam, _ = oracle_lambda(P, y_hat, k_hat)
        worst = max(worst, abs(lam - fit.lam))
        interior += 0 < fit.lam < 1
    lambdas = []
    for row in PUBLISHED_ROWS:
        y_hat, k_hat = published_instance(row, P_PUBLISHED)
        model = ErrorModel(P_PUBLISHED)
        fit = optimize_lambda(model, y_hat, k_hat)
        res = corrected_estimate(row[1], model, y_hat, k_hat, fit.lam, fit.B)
        lambdas.append(fit.lam)
        assert round(fit.B[0]) == row[3] and round(res.std) == row[5]
    elapsed = time.perf_counter() - t0
    ok = worst <= 2e-3 and all(lam == 0 for lam in lambdas) and elapsed < 60
    acceptance(4, ok, f"max |lambda - grid| {worst:.4f} ({interior}/50 interior), published-scale lambdas "
                      f"{lambdas}, {elapsed:.0f} s")
    assert ok


# 5 ---------------------------------------------------------------------------

def naive_levenshtein(a, b):
    @functools.lru_cache(maxsize=None)
    def d(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(d(i + 1, j) + 1, d(i, j + 1) + 1, d(i + 1, j + 1) + (a[i] != b[j]))
    return d(0, 0)


def test_05_levenshtein_oracle_and_axioms(acceptance):
    rng = np.random.default_rng(5)
    words = lambda: "".join(rng.choice(list("abc"), int(rng.integers(1, 9))))
    mismatches = 0
    for _ in range(10_000):
        a, b = words(), words()
        if lev_norm(a, b) != naive_levenshtein(a, b) / max(len(a), len(b)):
            mismatches += 1
    alphabet = list("abcde ")
    rand = lambda: "".join(rng.choice(alphabet, int(rng.integers(1, 10))))
    axiom_failures = 0
    for _ in range(100_000):
        a, b = rand(), rand()
        ab, ba = distance_vector(a, b), distance_vector(b, a)
        axiom_failures += any(not 0 <= v <= 1 for v in ab) or any(abs(x - y) > 1e-12 for x, y in zip(ab, ba))
    triangle_failures = 0
    for _ in range(100_000):
        a, b, c = rand(), rand(), rand()
        for n in (1, 2, 3):
            m = f"jaccard_{n}"
            triangle_failures += distance(m, a, c) > distance(m, a, b) + distance(m, b, c) + 1e-12
    ok = mismatches == 0 and axiom_failures == 0 and triangle_failures == 0
    acceptance(5, ok, f"{mismatches} oracle mismatches in 10^4 pairs, {axiom_failures} range/symmetry and "
                      f"{triangle_failures} triangle failures in 10^5 samples")
    assert ok


# 6 ---------------------------------------------------------------------------

def distinct_trigram_string(length, rng):
    letters = list(ALPHABET.strip())
    while True:
        s = "".join(rng.choice(letters, length))
        grams = [s[i:i + 3] for i in range(length - 2)]
        if len(set(grams)) == len(grams):
            return s


def window_pair(target, rng):
    """Two windows of one string whose trigram sets have exactly the target Jaccard similarity."""
    shapes = {0.0: (20, 40), 0.25: (30, 18), 0.5: (30, 10), 0.75: (28, 4), 1.0: (30, 0)}
    t, o = shapes[target]
    base = distinct_trigram_string(t + o + 2, rng)
    return base[:t + 2], base[o:o + t + 2] if o <= t else base[o:]


def test_06_minhash_collision_property(acceptance):
    rng = np.random.default_rng(6)
    hashes = HashFamily.draw(10_000, rng)
    worst, rows = 0.0, []
    for target in (0.0, 0.25, 0.5, 0.75, 1.0):
        for _ in range(4):
            a, b = window_pair(target, rng)
            ia, ib = trigram_ids(a), trigram_ids(b)
            sa, sb = set(ia.tolist()), set(ib.tolist())
            J = len(sa & sb) / len(sa | sb)
            assert J == target
            ma, mb = hashes.minhash(ia), hashes.minhash(ib)
            pre = float(np.mean(ma == mb))
            post = float(np.mean(hashes.bits(ma) == hashes.bits(mb)))
            sigma = np.sqrt(J * (1 - J) / 10_000)
            sigma_bit = np.sqrt((1 + J) / 2 * (1 - J) / 2 / 10_000)
            z = abs(pre - J) / sigma if sigma else (0.0 if pre == J else np.inf)
            z_bit = abs(post - (1 + J) / 2) / sigma_bit if sigma_bit else (0.0 if post == 1 else np.inf)
            worst = max(worst, z, z_bit)
            rows.append((J, pre, post))
    ok = worst <= 3
    acceptance(6, ok, f"20 pairs, worst deviation {worst:.2f} sigma")
    assert ok


# 7 ---------------------------------------------------------------------------

def test_07_lsh_recall(acceptance):
    t0 = time.perf_counter()
    result = recall_benchmark(n_index=10_000, n_queries=1000, m=100, min_similarity=0.7, seed=0)
    elapsed = time.perf_counter() - t0
    ok = result.partner_recall >= 0.95 and elapsed < 120
    acceptance(7, ok, f"partner recall {result.partner_recall:.3f} over {result.n_queries} queries, "
                      f"{elapsed:.0f} s")
    assert ok


# 8 ---------------------------------------------------------------------------

def test_08_cv_and_grid(acceptance):
    rng = np.random.default_rng(8)
    imbalance = 0
    for _ in range(200):
        n = int(rng.integers(20, 400))
        labels = (rng.random(n) < rng.uniform(0.1, 0.5)).astype(int)
        if min(labels.sum(), n - labels.sum()) < 5:
            continue
        folds = stratified_kfold(labels, 5, int(rng.integers(1 << 30)))
        for c in (0, 1):
            counts = [int(np.sum(labels[f] == c)) for f in folds]
            imbalance = max(imbalance, max(counts) - min(counts))
    f1, p, r = precision_recall_f1(ConfusionCounts(tp=8, fp=4, tn=0, fn=5))
    argmax_ok = True
    for seed in range(3):
        X = rng.normal(size=(90, 3))
        y = (X[:, 0] + rng.normal(0, 0.8, 90) > 0.3).astype(int)
        data = LabeledSet(X, y, range(90))
        for algo, grid in [("kNN", {"k": [1, 3, 5, 9, 15]}), ("LR", {"C": [0.01, 1.0], "penalty": ["l2"]}),
                           ("RF", {"n": [10], "d": [1, 2, 3]})]:
            best, report = grid_search(algo, data, grid, k=5, seed=seed)
            top = max(res.mean_f1 for res in report if res.ok)
            argmax_ok &= best.mean_f1 == top and best in report
    ok = imbalance <= 1 and round(f1, 3) == 0.640 and argmax_ok
    acceptance(8, ok, f"fold imbalance {imbalance}, F1 {f1:.3f}, grid argmax {argmax_ok}")
    assert ok


# 9 ---------------------------------------------------------------------------

SANITY_MODELS = {
    "LR": ModelSpec.of("LR", C=1.0), "LDA": ModelSpec.of("LDA"), "LinSVC": ModelSpec.of("LinSVC", C=1.0),
    "kNN": ModelSpec.of("kNN", k=5), "MNB": ModelSpec.of("MNB", alpha=1.0), "QDA": ModelSpec.of("QDA"),
    "RBFSVC": ModelSpec.of("RBFSVC", C=1.0, gamma=0.1), "RF": ModelSpec.of("RF", n=50, d=3),
    "GB": ModelSpec.of("GB", n=50, d=2, lr=0.1), "AB": ModelSpec.of("AB", n=50, d=1, lr=1.0),
}


def separable_blobs(rng, n=200):
    y = (np.arange(n) % 2).astype(int)
    centres = np.where(y[:, None] == 1, [10.0, 1.0, 2.0], [1.0, 10.0, 2.0])
    return np.abs(centres + rng.normal(0, 0.7, (n, 3))), y


def test_09_classifier_sanity(acceptance):
    assert set(SANITY_MODELS) == set(ALGORITHMS)
    rng = np.random.default_rng(9)
    X, y = separable_blobs(rng)
    f1s = {}
    for name, spec in SANITY_MODELS.items():
        model = train(spec, LabeledSet(X, y, range(len(y)), "web"), seed=0)
        f1s[name] = scores(model.predict(X), y)[0]
    knn_ok = True
    for _ in range(20):
        Xr = rng.normal(size=(60, 4))
        yr = rng.integers(0, 2, 60)
        if len(set(yr)) < 2:
            continue
        model = train(ModelSpec.of("kNN", k=1), LabeledSet(Xr, yr, range(60)))
        knn_ok &= scores(model.predict(Xr), yr)[0] == 1.0
    try:
        train(SANITY_MODELS["MNB"], LabeledSet(X, y, range(len(y)), "distance"))
        mnb_rejected = False
    except ValueError:
        mnb_rejected = True
    ok = all(v == 1.0 for v in f1s.values()) and knn_ok and mnb_rejected
    failing = [k for k, v in f1s.items() if v != 1.0]
    acceptance(9, ok, f"in-sample F1 = 1 for {len(f1s) - len(failing)}/{len(f1s)} classifiers{(' ' + str(failing)) if failing else ''}"
                      f", 1-NN {knn_ok}, MNB rejected on distances {mnb_rejected}")
    assert ok


# 10 --------------------------------------------------------------------------

@pytest.mark.slow
def test_10_end_to_end_simulation(acceptance):
    spec = SyntheticSpec(n_companies=10_000, years=(2016,), target_P=REFERENCE_P, write_pages=False, distractors=0)
    t0 = time.perf_counter()
    reps = [r for seed in range(100) for r in replicate(spec, seed)]
    elapsed = time.perf_counter() - t0
    covered = sum(r.covered for r in reps)
    # uncorrected bias against the error model's prediction on the same modelled companies
    Pt = np.asarray(REFERENCE_P).T
    diff = np.array([(r.y_hat - r.modelled_true[0]) - ((Pt - np.eye(2)) @ np.array(r.modelled_true))[0] for r in reps])
    observed = np.array([r.y_hat - r.modelled_true[0] for r in reps])
    bias_se = diff.std(ddof=1) / np.sqrt(len(diff))
    bias_ok = abs(diff.mean()) <= 3 * bias_se
    z = np.array([(r.estimate - r.true_total) / r.std for r in reps])
    ok = covered >= 93 and bias_ok and elapsed < 600
    acceptance(10, ok, f"coverage {covered}/100 (z mean {z.mean():.2f}, z sd {z.std(ddof=1):.2f}, mean lambda "
                       f"{np.mean([r.lam for r in reps]):.2f}); uncorrected bias {observed.mean():.4g} vs predicted "
                       f"{(observed - diff).mean():.4g}, gap {diff.mean() / bias_se:.2f} SE; {elapsed:.0f} s")
    assert bias_ok and elapsed < 600
    assert covered >= 93


# 11 --------------------------------------------------------------------------

def test_11_combination_truth_table(acceptance):
    expected = {(-1, -1): -1, (-1, 0): 0, (-1, 1): 1, (0, -1): 0, (1, -1): 1,
                (0, 0): 0, (0, 1): 0, (1, 0): 0, (1, 1): 1}
    got = {(br, web): combine(br, web) for br, web in itertools.product((-1, 0, 1), repeat=2)}
    ok = got == expected
    acceptance(11, ok, "9 of 9 cases" if ok else f"{got}")
    assert ok


# 12 --------------------------------------------------------------------------

def exported_counts(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    return [row["count"] for row in rows]


def adversarial_values(counts, edges, rng):
    values = []
    for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
        # pile companies onto bin edges and just inside them
        values += [lo] * (c // 2) + [np.nextafter(hi, lo)] * (c - c // 2)
    values += [0.0] * int(rng.integers(0, 30)) + [-5.0] * int(rng.integers(0, 30))
    return values


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 45), min_size=1, max_size=12), st.integers(0, 2**32 - 1))
def test_12_privacy_suppression_property(tmp_path_factory, counts, seed):
    rng = np.random.default_rng(seed)
    edges = np.cumsum(rng.uniform(1, 100, len(counts) + 1)) + 1
    path = tmp_path_factory.mktemp("h") / "h.csv"
    values = adversarial_values(counts, edges, rng)
    histogram_export(values, edges, path)
    for raw, c in zip(exported_counts(path), counts):
        assert raw == "suppressed" if 1 <= c <= 19 else raw == str(c)
    # automatic log bins as well
    if any(v > 0 for v in values):
        histogram_export(values, None, path)
        assert all(raw == "suppressed" or int(raw) == 0 or int(raw) >= 20 for raw in exported_counts(path))


def test_12_privacy_suppression(acceptance, tmp_path):
    edges = np.array([1.0, 10.0, 100.0, 1000.0, 1e4])
    values = [1.0] * 19 + [10.0] * 20 + [999.999] * 1 + [0.0] * 50 + [-1.0] * 50
    histogram_export(values, edges, tmp_path / "h.csv")
    raw = exported_counts(tmp_path / "h.csv")
    ok = raw == ["suppressed", "20", "suppressed", "0"]
    acceptance(12, ok, f"boundary bins exported as {raw}; randomized adversarial bins checked separately")
    assert ok
