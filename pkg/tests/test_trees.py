import numpy as np
import pytest

import oracles
from triagekit.errors import DomainError, SchemaError
from triagekit.metrics import roc_auc
from triagekit.trees import (DecisionTree, ForestModel, GbdtParams, GbdtModel,
                             fit_tree, gbdt_fit, gbdt_margin, gbdt_predict,
                             leaf_weight, rf_fit, rf_predict, split_gain)


def test_split_gain_zero_gradients():
    assert split_gain(0.0, 1.0, 0.0, 1.0, 0.0, 2.5) == -2.5


def test_split_gain_symmetric_no_benefit():
    assert split_gain(-1.0, 1.0, -1.0, 1.0, 0.0, 0.0) == pytest.approx(0.0)


def test_split_gain_hand_value():
    assert split_gain(-2.0, 2.0, 2.0, 2.0, 1.0, 0.0) == pytest.approx(4.0 / 3.0)


def test_leaf_weight_cases():
    assert leaf_weight(0.0, 1.0, 1.0, 0.0) == 0.0
    assert leaf_weight(0.5, 1.0, 1.0, 0.6) == 0.0  # dead zone |G| <= alpha
    assert leaf_weight(3.0, 1.0, 1.0, 1.0) == pytest.approx(-1.0)


def test_leaf_weight_no_l1_closed_form(rng):
    for _ in range(100):
        G = rng.normal() * 5
        H = abs(rng.normal()) * 3 + 0.1
        lam = abs(rng.normal()) * 2
        assert leaf_weight(G, H, lam, 0.0) == pytest.approx(-G / (H + lam), abs=1e-12)


def test_leaf_weight_matches_numeric_minimizer(rng):
    worst = 0.0
    for _ in range(1000):
        G = float(rng.normal() * 10)
        H = float(abs(rng.normal()) * 5)
        lam = float(abs(rng.normal()) * 3 + 0.01)
        alpha = float(abs(rng.normal()) * 4)
        w = leaf_weight(G, H, lam, alpha)
        w_ref = oracles.leaf_weight_numeric(G, H, lam, alpha)
        worst = max(worst, abs(w - w_ref))
    assert worst < 1e-6


def test_fit_tree_zero_gradients_single_leaf(rng):
    X = rng.standard_normal((20, 3))
    tree = fit_tree(X, np.zeros(20), np.ones(20), GbdtParams(eta=1.0))
    assert tree.n_nodes == 1
    assert tree.weight[0] == 0.0


def test_fit_tree_separable_stump_matches_brute_force(rng):
    X = np.concatenate([rng.uniform(-2, -0.5, 12), rng.uniform(0.5, 2, 13)]).reshape(-1, 1)
    y = np.concatenate([-np.ones(12), np.ones(13)])
    params = GbdtParams(eta=1.0, max_depth=1, lambda_=0.0, gamma=0.0, n_estimators=1)
    tree = fit_tree(X, -y, np.ones(25), params)
    fitted_ref, _ = oracles.best_stump(X, y)
    out = np.zeros(25)
    tree.predict_into(np.ascontiguousarray(X), out)
    assert out == pytest.approx(fitted_ref, abs=1e-9)
    assert -2.0 < tree.threshold[0] < 2.0
    left = X[:, 0] < tree.threshold[0]
    assert left.sum() == 12  # splits between the classes


def test_all_missing_column_never_chosen(rng):
    X = rng.standard_normal((30, 2))
    X[:, 1] = np.nan
    y = (X[:, 0] > 0).astype(float)
    model = gbdt_fit(X, y, GbdtParams(n_estimators=5, max_depth=3), "squared", seed=0)
    for tree in model.trees:
        assert not (tree.feature == 1).any()


def test_gbdt_zero_estimators_base_score(rng):
    X = rng.standard_normal((10, 2))
    y = np.array([0, 1] * 5, dtype=float)
    model = gbdt_fit(X, y, GbdtParams(n_estimators=0), "logistic", seed=0)
    probs = gbdt_predict(model, X)
    assert np.allclose(probs, 0.5)
    reg = gbdt_fit(X, y, GbdtParams(n_estimators=0), "squared", seed=0)
    assert np.allclose(gbdt_predict(reg, X), 0.5)


def test_training_rmse_monotone_squared(rng):
    X = rng.standard_normal((120, 5))
    y = X[:, 0] * 2 + np.sin(X[:, 1]) + 0.3 * rng.standard_normal(120)
    params = GbdtParams(eta=0.2, max_depth=3, gamma=0.0, alpha=0.0, lambda_=1.0,
                        n_estimators=40)
    model = gbdt_fit(X, y, params, "squared", seed=3)
    margins = np.full(120, model.base_score)
    last = float(np.sqrt(np.mean((margins - y) ** 2)))
    for tree in model.trees:
        tree.predict_into(X, margins)
        rmse = float(np.sqrt(np.mean((margins - y) ** 2)))
        assert rmse <= last + 1e-9
        last = rmse


def test_logistic_separable_reaches_perfect_auc(rng):
    X = rng.standard_normal((80, 2))
    y = (X[:, 0] + X[:, 1] > 0).astype(float)
    model = gbdt_fit(X, y, GbdtParams(n_estimators=50), "logistic", seed=1)
    assert roc_auc(gbdt_predict(model, X), y.astype(int)) == 1.0


def test_predict_single_stump_routing():
    tree = DecisionTree(
        feature=np.array([0, -1, -1], dtype=np.int32),
        threshold=np.array([0.5, 0.0, 0.0]),
        default_left=np.array([1, 0, 0], dtype=np.uint8),
        left=np.array([1, -1, -1], dtype=np.int32),
        right=np.array([2, -1, -1], dtype=np.int32),
        weight=np.array([0.0, -2.0, 3.0]),
    )
    model = GbdtModel(params=GbdtParams(), loss="squared", base_score=1.0,
                      trees=(tree,), feature_names=("f0",))
    X = np.array([[0.0], [1.0], [np.nan]])
    margins = gbdt_margin(model, X)
    assert margins.tolist() == [-1.0, 4.0, -1.0]  # base + leaf; NaN follows default left


def test_batch_equals_per_row(rng):
    X = rng.standard_normal((40, 4))
    X[rng.random((40, 4)) < 0.3] = np.nan
    y = (np.nansum(X, axis=1) > 0).astype(float)
    model = gbdt_fit(X, y, GbdtParams(n_estimators=8, max_depth=4), "logistic", seed=5)
    batch = gbdt_predict(model, X)
    rows = np.array([gbdt_predict(model, X[i:i + 1])[0] for i in range(40)])
    assert np.array_equal(batch, rows)


def test_every_missingness_pattern_reaches_a_leaf(rng):
    X = rng.standard_normal((60, 3))
    y = (X[:, 0] > 0).astype(float)
    model = gbdt_fit(X, y, GbdtParams(n_estimators=10, max_depth=4), "logistic", seed=2)
    # all 8 missingness patterns of a probe row
    for mask in range(8):
        row = np.array([[0.3, -0.2, 0.9]])
        for j in range(3):
            if mask >> j & 1:
                row[0, j] = np.nan
        out = gbdt_predict(model, row)
        assert np.isfinite(out).all()


def test_determinism_bit_identical(rng):
    X = rng.standard_normal((100, 6))
    X[rng.random((100, 6)) < 0.2] = np.nan
    y = (np.nansum(X[:, :2], axis=1) > 0).astype(float)
    params = GbdtParams(n_estimators=12, max_depth=5, subsample=0.7)
    a = gbdt_fit(X, y, params, "logistic", seed=11)
    b = gbdt_fit(X, y, params, "logistic", seed=11)
    assert a.to_dict() == b.to_dict()
    c = gbdt_fit(X, y, params, "logistic", seed=12)
    assert a.to_dict() != c.to_dict()


def test_stump_invariant_fitted_values(rng):
    # depth-1, 1 tree, eta 1, lambda 0, gamma 0, squared loss == optimal stump
    for trial in range(5):
        X = rng.standard_normal((30, 3))
        y = rng.standard_normal(30) + (X[:, trial % 3] > 0.2) * 2.0
        params = GbdtParams(eta=1.0, max_depth=1, lambda_=0.0, gamma=0.0,
                            alpha=0.0, n_estimators=1, subsample=1.0)
        model = gbdt_fit(X, y, params, "squared", seed=trial)
        pred = gbdt_predict(model, X)
        ref_fit, ref_sse = oracles.best_stump(X, y - y.mean())
        assert np.sum((pred - y) ** 2) == pytest.approx(
            np.sum((ref_fit + y.mean() - y) ** 2), abs=1e-9)


def test_gbdt_rejects_bad_inputs(rng):
    X = rng.standard_normal((4, 2))
    with pytest.raises(DomainError):
        gbdt_fit(X, np.array([0.0, 0.5, 1.0, 0.0]), GbdtParams(), "logistic")
    with pytest.raises(DomainError):
        gbdt_fit(np.empty((0, 2)), np.array([]), GbdtParams(), "squared")
    model = gbdt_fit(X, np.array([0.0, 1.0, 0.0, 1.0]), GbdtParams(n_estimators=2),
                     "logistic", seed=0)
    with pytest.raises(SchemaError):
        gbdt_predict(model, rng.standard_normal((3, 5)))


def test_params_validation():
    with pytest.raises(DomainError):
        GbdtParams(eta=0.0)
    with pytest.raises(DomainError):
        GbdtParams(subsample=1.5)
    with pytest.raises(DomainError):
        GbdtParams(max_depth=0)
    with pytest.raises(DomainError):
        GbdtParams(lambda_=-1.0)


def test_rf_single_tree_equals_decision_tree(rng):
    X = rng.standard_normal((50, 4))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(float)
    forest = rf_fit(X, y, n_trees=1, max_depth=6, seed=3, bootstrap=False,
                    max_features="all")
    params = GbdtParams(eta=1.0, gamma=0.0, max_depth=6, lambda_=0.0, alpha=0.0,
                        n_estimators=1)
    single = fit_tree(X, -y, np.ones(50), params)
    assert forest.trees[0].to_dict() == single.to_dict()


def test_rf_constant_target(rng):
    X = rng.standard_normal((30, 3))
    y = np.full(30, 4.2)
    forest = rf_fit(X, y, n_trees=5, seed=0)
    assert np.allclose(rf_predict(forest, X), 4.2)


def test_rf_regression_predictions_bounded(rng):
    for _ in range(5):
        X = rng.standard_normal((60, 4))
        y = rng.uniform(-3, 7, 60)
        forest = rf_fit(X, y, n_trees=20, max_depth=5, seed=1)
        pred = rf_predict(forest, X)
        assert (pred >= y.min() - 1e-12).all() and (pred <= y.max() + 1e-12).all()
