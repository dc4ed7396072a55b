import numpy as np
import pytest

import oracles
from conftest import small_schema
from triagekit.dataset import RecordTable
from triagekit.explain import global_importance, sample_background, tree_shap
from triagekit.trees import (DecisionTree, GbdtModel, GbdtParams, gbdt_fit,
                             gbdt_margin)


def make_model(trees, names, base=0.0, loss="squared"):
    return GbdtModel(params=GbdtParams(), loss=loss, base_score=base,
                     trees=tuple(trees), feature_names=tuple(names))


def single_leaf_tree(value):
    return DecisionTree(
        feature=np.array([-1], dtype=np.int32),
        threshold=np.zeros(1),
        default_left=np.zeros(1, dtype=np.uint8),
        left=np.array([-1], dtype=np.int32),
        right=np.array([-1], dtype=np.int32),
        weight=np.array([value]),
    )


def stump(feature, threshold, left_w, right_w):
    return DecisionTree(
        feature=np.array([feature, -1, -1], dtype=np.int32),
        threshold=np.array([threshold, 0.0, 0.0]),
        default_left=np.array([1, 0, 0], dtype=np.uint8),
        left=np.array([1, -1, -1], dtype=np.int32),
        right=np.array([2, -1, -1], dtype=np.int32),
        weight=np.array([0.0, left_w, right_w]),
    )


def test_single_leaf_all_zero():
    model = make_model([single_leaf_tree(3.5)], ["a", "b"])
    background = np.zeros((4, 2))
    att = tree_shap(model, np.array([1.0, 2.0]), background)
    assert att.values.tolist() == [0.0, 0.0]
    assert att.base_value == pytest.approx(3.5)
    assert att.prediction == pytest.approx(3.5)


def test_stump_two_player_hand_case():
    # background split 50/50 across the threshold, x routed right:
    # value = right leaf - mean leaf, all other features 0
    model = make_model([stump(0, 0.0, -1.0, 5.0)], ["f", "g"])
    background = np.array([[-1.0, 9.0], [-2.0, 9.0], [1.0, 9.0], [2.0, 9.0]])
    x = np.array([3.0, 0.0])
    att = tree_shap(model, x, background)
    assert att.values[0] == pytest.approx(5.0 - 2.0)  # mean leaf = 2.0
    assert att.values[1] == 0.0
    assert att.base_value + att.values.sum() == pytest.approx(att.prediction, abs=1e-12)


def test_matches_brute_force_up_to_ten_features(rng):
    for trial in range(6):
        p = int(rng.integers(4, 11))
        n = 50
        X = rng.standard_normal((n, p))
        X[rng.random((n, p)) < 0.3] = np.nan
        y = np.nansum(X[:, :3], axis=1) + 0.2 * rng.standard_normal(n)
        params = GbdtParams(eta=0.5, max_depth=int(rng.integers(2, 5)),
                            n_estimators=int(rng.integers(2, 5)), lambda_=0.3,
                            alpha=0.05)
        model = gbdt_fit(X, y, params, "squared", seed=trial)
        background = X[:30]
        for row in (0, 5):
            att = tree_shap(model, X[row], background)
            phi_ref, base_ref = oracles.shapley_brute(model, X[row], background)
            assert att.values == pytest.approx(phi_ref, abs=1e-9)
            assert att.base_value == pytest.approx(base_ref, abs=1e-9)


def test_local_accuracy_every_row(rng):
    n, p = 40, 6
    X = rng.standard_normal((n, p))
    X[rng.random((n, p)) < 0.25] = np.nan
    y = (np.nansum(X, axis=1) > 0).astype(float)
    model = gbdt_fit(X, y, GbdtParams(n_estimators=15, max_depth=4), "logistic", seed=9)
    margins = gbdt_margin(model, X)
    for i in range(n):
        att = tree_shap(model, X[i], X)
        assert att.base_value + att.values.sum() == pytest.approx(margins[i], abs=1e-9)


def test_dummy_feature_gets_zero(rng):
    X = rng.standard_normal((50, 3))
    y = X[:, 0] * 2.0
    model = gbdt_fit(X, y, GbdtParams(n_estimators=6, max_depth=3, subsample=1.0),
                     "squared", seed=4)
    assert not any((t.feature == 2).any() for t in model.trees)
    att = tree_shap(model, X[0], X)
    assert att.values[2] == 0.0


def test_symmetry_identical_features():
    # two features identical in background and in the trees' roles
    t1 = stump(0, 0.5, -1.0, 1.0)
    t2 = stump(1, 0.5, -1.0, 1.0)
    model = make_model([t1, t2], ["a", "b"])
    background = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
    x = np.array([1.0, 1.0])
    att = tree_shap(model, x, background)
    assert att.values[0] == pytest.approx(att.values[1], abs=1e-12)


def test_global_importance_single_active_feature(rng):
    X = rng.standard_normal((60, 4))
    y = X[:, 1] * 3.0
    table = RecordTable(tuple(f"p{i}" for i in range(60)), small_schema(4), X)
    model = gbdt_fit(X, y, GbdtParams(n_estimators=5, max_depth=3), "squared", seed=0,
                     feature_names=tuple(table.feature_names()))
    ranking = global_importance(model, table)
    assert ranking[0][0] == "lab1"
    assert all(value == 0.0 for name, value in ranking[1:])


def test_global_importance_row_permutation_invariant(rng):
    X = rng.standard_normal((40, 3))
    y = X[:, 0] + X[:, 2]
    model = gbdt_fit(X, y, GbdtParams(n_estimators=4, max_depth=3), "squared", seed=1)
    table = RecordTable(tuple(f"p{i}" for i in range(40)), small_schema(3), X)
    ranking = global_importance(model, table, background=X)
    perm = rng.permutation(40)
    shuffled = table.select_rows(perm)
    ranking2 = global_importance(model, shuffled, background=X)
    assert [n for n, _ in ranking] == [n for n, _ in ranking2]
    assert [v for _, v in ranking] == pytest.approx([v for _, v in ranking2])


def test_constructed_signal_tops_ranking(tiny_demo_table):
    from triagekit.impute import fit_transform

    _, dense = fit_transform("median", tiny_demo_table)
    y = tiny_demo_table.special_care.astype(float)
    model = gbdt_fit(dense.values, y, GbdtParams(n_estimators=30, max_depth=3),
                     "logistic", seed=2,
                     feature_names=tuple(tiny_demo_table.feature_names()))
    ranking = global_importance(model, dense)
    top_names = [name for name, _ in ranking[:8]]
    assert any(name in top_names for name in
               ("Age", "CRP", "Leukocytes", "Lymphocytes_pct", "DHL"))


def test_background_cap_is_seeded(rng):
    X = rng.standard_normal((50, 2))
    table = RecordTable(tuple(f"p{i}" for i in range(50)), small_schema(2), X)
    a = sample_background(table, cap=10, seed=3)
    b = sample_background(table, cap=10, seed=3)
    assert np.array_equal(a, b)
    assert a.shape == (10, 2)
