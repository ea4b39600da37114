import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crossborder.mlkit import (ALGORITHMS, GRIDS, KNN, LDA, QDA, SVC, AdaBoost, ConfusionCounts, DecisionTree,
                               GradientBoosting, LabeledSet, LogisticRegression, ModelSpec, MultinomialNB,
                               RandomForest, cross_validate, expand_grid, grid_search, load_model, read_grid_file,
                               sample_weights, save_model, scores, select_best, stratified_kfold, train,
                               write_grid_file, write_report)
from crossborder.mlkit.svm import rbf_kernel, smo


def blobs(n=120, d=3, gap=3.0, seed=0):
    rng = np.random.default_rng(seed)
    y = (np.arange(n) % 3 == 0).astype(int)
    X = rng.normal(size=(n, d)) + gap * y[:, None]
    return X, y


def test_scores_and_counts():
    f1, p, r, c = scores([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert c == ConfusionCounts(tp=2, fp=1, tn=1, fn=1)
    assert (p, r, f1) == (pytest.approx(2 / 3), pytest.approx(2 / 3), pytest.approx(2 / 3))
    assert scores([0, 0], [0, 0])[0] == 0.0
    with pytest.raises(ValueError):
        ConfusionCounts(-1, 0, 0, 0)
    with pytest.raises(ValueError):
        scores([1], [1, 0])


def test_sample_weights():
    y = np.array([0, 0, 0, 1])
    assert sample_weights(y).tolist() == [1, 1, 1, 1]
    w = sample_weights(y, "balanced")
    assert w[:3].sum() == pytest.approx(w[3:].sum())
    assert w.mean() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        sample_weights(y, "magic")


def test_logistic_regression_matches_direct_minimisation():
    optimize = pytest.importorskip("scipy.optimize")
    X, y = blobs(80, 2, gap=1.0, seed=1)
    for cw in ("uniform", "balanced"):
        model = LogisticRegression(C=0.5, penalty="l2", class_weight=cw, tol=1e-10, max_iter=100000).fit(X, y)
        w = sample_weights(y, cw)

        def objective(theta):
            z = X @ theta[:2] + theta[2]
            return 0.5 * C_inv * theta[:2] @ theta[:2] + np.sum(w * (np.logaddexp(0, z) - y * z))
        C_inv = 1 / 0.5
        ref = optimize.minimize(objective, np.zeros(3), method="BFGS", options={"gtol": 1e-10}).x
        assert np.allclose(np.r_[model.coef_, model.intercept_], ref, atol=1e-4)


def test_l1_penalty_zeroes_noise_features():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(200, 6))
    y = (X[:, 0] > 0).astype(int)
    model = LogisticRegression(C=0.05, penalty="l1").fit(X, y)
    assert abs(model.coef_[0]) > 0.1
    assert np.sum(model.coef_[1:] == 0) >= 4


def test_smo_solution_satisfies_kkt():
    X, y = blobs(60, 2, gap=1.0, seed=3)
    ys = np.where(y == 1, 1.0, -1.0)
    K = rbf_kernel(X, X, 0.5)
    C = np.full(len(y), 2.0)
    alpha, rho, _ = smo(K, ys, C, tol=1e-6)
    assert abs(alpha @ ys) < 1e-8
    assert np.all((alpha >= -1e-12) & (alpha <= C + 1e-12))
    margin = ys * (K @ (alpha * ys) - rho)
    free = (alpha > 1e-8) & (alpha < C - 1e-8)
    assert np.all(margin[alpha <= 1e-8] >= 1 - 1e-3)
    assert np.all(np.abs(margin[free] - 1) <= 1e-3)
    assert np.all(margin[alpha >= C - 1e-8] <= 1 + 1e-3)


def test_linear_svc_two_point_margin():
    X = np.array([[0.0, 0.0], [2.0, 0.0]])
    model = SVC(C=100.0, kernel="linear", tol=1e-8).fit(X, [0, 1])
    # maximum-margin separator x = 1 with unit functional margin
    assert np.allclose(model.coef_, [1.0, 0.0], atol=1e-6)
    assert model.rho_ == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        SVC(kernel="poly")


def test_lda_matches_closed_form_boundary():
    X = np.array([[0.0], [1.0], [2.0], [4.0], [5.0], [6.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    model = LDA().fit(X, y)
    # equal priors and shared variance: boundary at the midpoint of the means
    assert model.decision_function(np.array([[3.0]]))[0] == pytest.approx(0.0, abs=1e-12)
    assert model.predict(np.array([[2.9], [3.1]])).tolist() == [0, 1]


def test_qda_separates_by_variance():
    rng = np.random.default_rng(4)
    X = np.r_[rng.normal(0, 0.3, size=(200, 1)), rng.normal(0, 3.0, size=(200, 1))]
    y = np.r_[np.zeros(200), np.ones(200)].astype(int)
    model = QDA().fit(X, y)
    assert model.predict(np.array([[0.0], [5.0], [-5.0]])).tolist() == [0, 1, 1]
    # singular covariance falls back to a ridge instead of failing
    QDA().fit(np.array([[1.0, 1.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]), np.array([0, 0, 1, 1]))


def test_multinomial_nb_hand_computed():
    X = np.array([[2.0, 0.0], [0.0, 2.0]])
    model = MultinomialNB(alpha=1.0).fit(X, [0, 1])
    assert np.allclose(np.exp(model.feature_log_prob_), [[0.75, 0.25], [0.25, 0.75]])
    with pytest.raises(ValueError):
        MultinomialNB().fit(np.array([[-1.0, 0.0], [0.0, 1.0]]), [0, 1])


def test_knn_vote_and_tie_order():
    X = np.array([[0.0], [1.0], [10.0]])
    assert KNN(1).fit(X, [0, 1, 1]).predict(np.array([[0.4], [0.6]])).tolist() == [0, 1]
    assert KNN(3).fit(X, [0, 1, 1]).predict(np.array([[0.0]])).tolist() == [1]


@pytest.mark.parametrize("model", [DecisionTree(d=4), RandomForest(n=30, d=4), GradientBoosting(n=30, d=2),
                                   AdaBoost(n=30, d=1)])
def test_trees_learn_xor(model):
    rng = np.random.default_rng(5)
    X = rng.uniform(-1, 1, size=(400, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
    if isinstance(model, AdaBoost):
        # stumps cannot represent xor; check a threshold concept instead
        y = (X[:, 0] > 0.3).astype(int)
    f1 = scores(model.fit(X, y).predict(X), y)[0]
    assert f1 > 0.9


def test_random_forest_is_seeded():
    X, y = blobs(80, 4, gap=1.0, seed=6)
    a = RandomForest(n=10, d=3, seed=1).fit(X, y).decision_function(X)
    b = RandomForest(n=10, d=3, seed=1).fit(X, y).decision_function(X)
    assert np.array_equal(a, b)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=10, max_size=200), st.integers(2, 5), st.integers(0, 10**6))
def test_stratified_folds_partition_and_balance(labels, k, seed):
    labels = np.array(labels)
    if min(np.sum(labels == 0), np.sum(labels == 1)) < k:
        with pytest.raises(ValueError):
            stratified_kfold(labels, k, seed)
        return
    folds = stratified_kfold(labels, k, seed)
    assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(len(labels)))
    for c in (0, 1):
        counts = [int(np.sum(labels[f] == c)) for f in folds]
        assert max(counts) - min(counts) <= 1


def test_grid_matches_reference_sizes():
    sizes = {a: len(expand_grid(a)) for a in ALGORITHMS}
    assert sizes == {"LR": 20, "LDA": 1, "LinSVC": 10, "kNN": 20, "MNB": 4, "QDA": 1, "RBFSVC": 40,
                     "RF": 64, "GB": 96, "AB": 192}


def test_train_guards():
    X, y = blobs(30, 2)
    with pytest.raises(ValueError):
        train(ModelSpec.of("MNB"), LabeledSet(np.abs(X), y, range(30), "distance"))
    with pytest.raises(ValueError):
        train(ModelSpec.of("LR"), LabeledSet(X, np.zeros(30, int), range(30)))
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        train(ModelSpec.of("LR"), LabeledSet(bad, y, range(30)))
    with pytest.raises(ValueError):
        ModelSpec.of("XGB")


def test_cross_validate_records_failures():
    X, y = blobs(30, 2)
    data = LabeledSet(X, y, range(30))
    folds = stratified_kfold(y, 5, 0)
    res = cross_validate(ModelSpec.of("MNB"), data, folds)
    assert not res.ok and "ValueError" in res.error and np.isnan(res.mean_f1)
    res = cross_validate(ModelSpec.of("LDA"), data, folds)
    assert res.ok and len(res.f1) == 5 and res.std_f1 == pytest.approx(np.std(res.f1))


def test_grid_search_picks_argmax_of_report(tmp_path):
    X, y = blobs(60, 2, gap=1.5, seed=7)
    data = LabeledSet(X, y, range(60))
    best, report = grid_search("kNN", data, {"k": [1, 3, 5, 7]}, k=3, seed=1)
    top = max(r.mean_f1 for r in report if r.ok)
    assert best.mean_f1 == top
    assert best is select_best(report)
    write_report(report, tmp_path / "r.csv", "config=abc seed=1 stage=train")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].startswith("# config=abc") and len(lines) == 2 + len(report)


def test_grid_file_roundtrip(tmp_path):
    path = tmp_path / "grid.txt"
    write_grid_file(path)
    assert read_grid_file(path) == GRIDS
    path.write_text("NOPE.x = 1\n")
    with pytest.raises(ValueError):
        read_grid_file(path)


def test_model_file_roundtrip(tmp_path):
    X, y = blobs(40, 2)
    model = train(ModelSpec.of("RF", n=5, d=2), LabeledSet(X, y, range(40)))
    save_model(model, tmp_path / "m.bin")
    back = load_model(tmp_path / "m.bin")
    assert np.array_equal(back.decision_function(X), model.decision_function(X))
    assert back.spec == model.spec
    (tmp_path / "x.bin").write_bytes(b"junk")
    with pytest.raises(ValueError):
        load_model(tmp_path / "x.bin")
