from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from effortcast.baselines import (
    ESTIMATORS,
    AdaBoostR2,
    ELM,
    Hyperparams,
    KNNRegressor,
    LinearRegression,
    LinearSVR,
    MLP,
    RandomForest,
    RegressionTree,
    fit_model,
)
from effortcast.baselines.boosting import weighted_median
from effortcast.baselines.preprocess import fit_preprocess, transform
from effortcast.dataset import MISSING, Categorical, Dataset, FeatureSpec, Numeric, ProjectRecord
from effortcast.errors import (
    DivergenceDetected,
    EmptyTrainingSet,
    InvalidHyperparams,
    KExceedsTrainingSize,
    SingularSystem,
)
from effortcast.synthetic import desharnais_like
from oracles import weighted_median_direct


def _xy(n=40, p=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = X @ np.arange(1, p + 1) + rng.normal(scale=0.3, size=n) + 10.0
    return X, y


# --- linear regression -------------------------------------------------------

def test_linreg_recovers_planted_slope_and_intercept():
    x = np.linspace(0, 10, 25)[:, None]
    lr = LinearRegression().fit(x, 3 * x[:, 0] + 1)
    assert abs(lr.coef_[0] - 3) < 1e-6 and abs(lr.intercept_ - 1) < 1e-6


def test_linreg_recovers_two_planted_coefficients():
    rng = np.random.default_rng(2)
    X = rng.uniform(-5, 5, size=(30, 2))
    lr = LinearRegression().fit(X, X @ np.array([3.0, 1.0]))
    assert np.abs(lr.coef_ - [3.0, 1.0]).max() < 1e-6 and abs(lr.intercept_) < 1e-6


def test_linreg_matches_lstsq_oracle():
    X, y = _xy()
    lr = LinearRegression(lam=0.0).fit(X, y)
    A = np.hstack([np.ones((len(X), 1)), X])
    w, *_ = np.linalg.lstsq(A, y, rcond=None)
    assert np.allclose(lr.coef_, w[1:], atol=1e-9) and abs(lr.intercept_ - w[0]) < 1e-9


def test_linreg_singular_design():
    X = np.column_stack([np.arange(10.0), np.arange(10.0)])
    y = 2 * np.arange(10.0)
    lr = LinearRegression(lam=0.0).fit(X, y)
    assert np.allclose(lr.predict(X), y, atol=1e-4)
    with pytest.raises(SingularSystem):
        LinearRegression(lam=0.0, fallback=False).fit(X, y)


# --- knn -----------------------------------------------------------------------

def test_knn_k1_has_zero_training_error():
    X, y = _xy()
    assert np.array_equal(KNNRegressor(1).fit(X, y).predict(X), y)


def test_knn_k_equals_n_is_global_mean_exactly():
    X, y = _xy(n=37)
    pred = KNNRegressor(37).fit(X, y).predict(X[:5])
    assert np.all(pred == math.fsum(y) / len(y))


def test_knn_matches_brute_force():
    X, y = _xy(n=30, seed=5)
    Q = np.random.default_rng(9).normal(size=(8, 3))
    got = KNNRegressor(4).fit(X, y).predict(Q)
    for q, g in zip(Q, got):
        d = sorted((sum((a - b) ** 2 for a, b in zip(q, row)), i) for i, row in enumerate(X))
        assert g == pytest.approx(sum(y[i] for _, i in d[:4]) / 4, abs=1e-9)


def test_knn_k_too_large():
    with pytest.raises(KExceedsTrainingSize):
        KNNRegressor(5).fit(np.zeros((3, 1)), np.zeros(3))
    with pytest.raises(InvalidHyperparams):
        KNNRegressor(0)


# --- trees, forests, boosting --------------------------------------------------

def _stump_oracle(X, y, min_leaf):
    """Exhaustive best single split by SSE, written with plain loops."""
    def sse(vals):
        m = sum(vals) / len(vals)
        return sum((v - m) ** 2 for v in vals)

    best = (sse(list(y)), None, None)
    for j in range(X.shape[1]):
        vals = sorted(set(X[:, j]))
        for lo, hi in zip(vals, vals[1:]):
            thr = (lo + hi) / 2
            left = [y[i] for i in range(len(y)) if X[i, j] <= thr]
            right = [y[i] for i in range(len(y)) if X[i, j] > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            s = sse(left) + sse(right)
            if s < best[0] - 1e-9:
                best = (s, j, thr)
    return best


def test_depth_one_tree_matches_exhaustive_stump():
    X, y = _xy(n=25, seed=3)
    tree = RegressionTree(max_depth=1, min_leaf=3).fit(X, y)
    _, j, thr = _stump_oracle(X, y, 3)
    assert tree.feature_[0] == j and tree.threshold_[0] == pytest.approx(thr)
    left = X[:, j] <= thr
    expected = np.where(left, y[left].mean(), y[~left].mean())
    assert np.allclose(tree.predict(X), expected)


def test_tree_respects_depth_and_leaf_size():
    X, y = _xy(n=60)
    tree = RegressionTree(max_depth=3, min_leaf=4).fit(X, y)
    assert tree.depth <= 3 and tree.n_leaves <= 8
    leaves = tree.predict(X)
    for v in np.unique(leaves):
        assert (leaves == v).sum() >= 4


def test_single_tree_forest_equals_tree():
    X, y = _xy(n=50, seed=4)
    forest = RandomForest(n_trees=1, max_depth=5, min_leaf=2, feature_frac=1.0, subsample=1.0, bootstrap=False).fit(X, y)
    tree = RegressionTree(max_depth=5, min_leaf=2).fit(X, y)
    Q = np.random.default_rng(1).normal(size=(40, 3))
    assert np.array_equal(forest.predict(Q), tree.predict(Q))


def test_forest_is_mean_of_trees():
    X, y = _xy(n=50)
    f = RandomForest(n_trees=7, seed=3).fit(X, y)
    assert np.allclose(f.predict(X), np.mean([t.predict(X) for t in f.trees_], axis=0))


@given(st.lists(st.tuples(st.integers(0, 50), st.floats(0.01, 10)), min_size=1, max_size=15))
def test_weighted_median_matches_oracle(items):
    vals = np.array([[float(v)] for v, _ in items])
    w = np.array([w for _, w in items])
    assert weighted_median(vals, w)[0] == weighted_median_direct([v for v, _ in items], list(w))


def test_adaboost_single_round_is_its_base_learner():
    X, y = _xy(n=40, seed=6)
    ab = AdaBoostR2(n_rounds=1, seed=11).fit(X, y)
    rows = np.random.default_rng(11).choice(len(X), size=len(X), replace=True, p=np.full(len(X), 1 / len(X)))
    base = RegressionTree(max_depth=3, min_leaf=1, feature_frac=1.0, seed=0).fit(X[rows], y[rows])
    Q = np.random.default_rng(2).normal(size=(20, 3))
    assert np.array_equal(ab.predict(Q), base.predict(Q))


def test_adaboost_round_weights_follow_linear_loss():
    X, y = _xy(n=40, seed=7)
    ab = AdaBoostR2(n_rounds=3, seed=1).fit(X, y)
    err = np.abs(ab.estimators_[0].predict(X) - y)
    avg = float(np.mean(err / err.max()))  # uniform initial weights
    assert ab.avg_losses_[0] == pytest.approx(avg)
    assert ab.estimator_weights_[0] == pytest.approx(math.log((1 - avg) / avg))
    # second round: weights w * beta**(1 - L), renormalised
    beta = avg / (1 - avg)
    w = np.full(len(X), 1 / len(X)) * beta ** (1 - err / err.max())
    p = w / w.sum()
    err2 = np.abs(ab.estimators_[1].predict(X) - y)
    assert ab.avg_losses_[1] == pytest.approx(float(p @ (err2 / err2.max())))


def test_adaboost_stops_on_perfect_fit():
    X = np.arange(8.0)[:, None]
    y = np.where(X[:, 0] < 4, 1.0, 5.0)
    ab = AdaBoostR2(n_rounds=10, seed=0).fit(X, y)
    assert ab.stop_reason_ == "perfect_fit"
    assert np.array_equal(ab.predict(X), y)


# --- elm, mlp, svr -------------------------------------------------------------

def test_elm_interpolates_when_hidden_at_least_n():
    X, y = _xy(n=20, seed=8)
    elm = ELM(n_hidden=25, seed=0).fit(X, y)
    assert np.mean(np.abs(elm.predict(X) - y)) < 1e-3


def test_elm_rejects_unknown_activation():
    with pytest.raises(InvalidHyperparams):
        ELM(activation="softsign")


def test_mlp_gradient_matches_central_differences():
    X, y = _xy(n=15, p=3, seed=9)
    y = (y - y.mean()) / y.std()
    mlp = MLP(n_hidden=5, seed=3)
    theta = mlp.init_params(3) + np.random.default_rng(0).normal(scale=0.3, size=5 * 3 + 5 + 5 + 1)
    _, g = mlp.loss_and_grad(theta, X, y)
    h = 1e-6
    num = np.zeros_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h
        num[i] = (mlp.loss_and_grad(theta + e, X, y)[0] - mlp.loss_and_grad(theta - e, X, y)[0]) / (2 * h)
    rel = np.abs(g - num) / np.maximum(np.abs(num), 1e-8)
    assert np.all((rel < 1e-5) | (np.abs(g - num) < 1e-10))


def test_mlp_training_reduces_loss_and_detects_divergence():
    X, y = _xy(n=40)
    mlp = MLP(n_hidden=8, epochs=200, step=0.05).fit(X, y)
    assert mlp.loss_history_[-1] < 0.5 * mlp.loss_history_[0]
    with pytest.raises(DivergenceDetected):
        MLP(n_hidden=8, epochs=200, step=1e6).fit(X, y * 1e6)


def test_svr_fits_linear_signal():
    X, y = _xy(n=80)
    svr = LinearSVR(epsilon=0.05, epochs=100, step=0.01).fit(X, y)
    resid = svr.predict(X) - y
    assert np.sqrt(np.mean(resid ** 2)) < 0.5 * y.std()
    assert svr.loss_history_[-1] <= svr.loss_history_[0]


# --- dataset-level fitting ------------------------------------------------------

def test_preprocess_imputes_and_one_hot_encodes():
    schema = (FeatureSpec("size", "numeric"), FeatureSpec("lang", "categorical"))
    recs = (
        ProjectRecord("a", {"size": Numeric(1.0), "lang": Categorical("Java")}, 1.0),
        ProjectRecord("b", {"size": Numeric(3.0), "lang": Categorical("C")}, 2.0),
        ProjectRecord("c", {"size": MISSING, "lang": Categorical("Java")}, 3.0),
    )
    state = fit_preprocess(Dataset(schema, recs))
    col = state.numeric[0]
    assert col.impute_value == 2.0 and col.mean == 2.0
    assert col.std == pytest.approx(np.std([1.0, 3.0, 2.0]))
    assert state.categorical[0].levels == ("C", "Java")
    vec = transform(state, ProjectRecord("d", {"size": MISSING, "lang": MISSING}, 1.0))
    assert list(vec) == [0.0, 0.0, 1.0]  # mean-imputed numeric, mode level Java


def test_empty_training_set():
    with pytest.raises(EmptyTrainingSet):
        fit_preprocess(Dataset((FeatureSpec("x", "numeric"),), ()))


@pytest.mark.parametrize("kind", sorted(ESTIMATORS))
def test_every_estimator_fits_and_is_seed_deterministic(kind):
    ds = desharnais_like(60, seed=1)
    params = {"n_trees": 10} if kind == "rf" else {"epochs": 50} if kind in ("mlp", "svm") else {}
    a = fit_model(ds, Hyperparams(kind, params), seed=4).predict(ds)
    b = fit_model(ds, Hyperparams(kind, params), seed=4).predict(ds)
    assert np.all(np.isfinite(a)) and np.array_equal(a, b)


def test_unknown_hyperparameter_rejected():
    with pytest.raises(InvalidHyperparams):
        Hyperparams("knn", {"neighbours": 3}).build()
    with pytest.raises(InvalidHyperparams):
        Hyperparams("xgboost")
