"""Exact per-prediction Shapley attributions for tree ensembles.

Attributions are computed on the raw margin (pre-sigmoid) under the
tree-path conditional expectation: node covers come from routing a
background table through each tree, and the polynomial path algorithm
yields the same values as enumerating all feature subsets. They describe
associations in the training data, not causal effects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _tree_kernels as kernels
from .dataset import RecordTable
from .errors import DomainError, SchemaError
from .trees import GbdtModel

BACKGROUND_CAP = 2000


@dataclass(frozen=True)
class Attribution:
    """base_value + values.sum() equals the raw-margin prediction."""

    base_value: float
    values: np.ndarray
    prediction: float
    feature_names: tuple[str, ...]

    def top(self, k: int = 5) -> list[tuple[str, float]]:
        order = np.argsort(-np.abs(self.values), kind="stable")[:k]
        return [(self.feature_names[i], float(self.values[i])) for i in order]


def sample_background(table: RecordTable, cap: int = BACKGROUND_CAP, seed: int = 0) -> np.ndarray:
    """Background matrix for cover counting, seeded-subsampled above the cap."""
    if table.n_patients == 0:
        raise DomainError("background table must be non-empty")
    values = table.values
    if table.n_patients > cap:
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(table.n_patients, size=cap, replace=False))
        values = values[rows]
    return np.ascontiguousarray(values)


def tree_covers(model: GbdtModel, background: np.ndarray) -> list[np.ndarray]:
    """Per-tree node cover counts from routing the background through."""
    background = np.ascontiguousarray(background, dtype=np.float64)
    if background.ndim != 2 or background.shape[1] != model.n_features:
        raise SchemaError("background feature count does not match the model")
    if background.shape[0] == 0:
        raise DomainError("background must be non-empty")
    return [
        kernels.route_covers(background, t.feature, t.threshold, t.default_left,
                             t.left, t.right, t.n_nodes)
        for t in model.trees
    ]


def _expected_margin(model: GbdtModel, covers: list[np.ndarray]) -> float:
    total = model.base_score
    for tree, cover in zip(model.trees, covers):
        leaves = tree.feature < 0
        if cover[0] > 0:
            total += float(np.dot(tree.weight[leaves], cover[leaves]) / cover[0])
    return total


def shap_matrix(model: GbdtModel, X: np.ndarray, covers: list[np.ndarray]) -> tuple[np.ndarray, float]:
    """(phi matrix rows x features, expected margin) for precomputed covers."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise SchemaError("row feature count does not match the model")
    phi = np.zeros((X.shape[0], model.n_features))
    for tree, cover in zip(model.trees, covers):
        kernels.shap_tree_batch(X, tree.feature, tree.threshold, tree.default_left,
                                tree.left, tree.right, tree.weight, cover,
                                tree.depth(), phi)
    return phi, _expected_margin(model, covers)


def tree_shap(model: GbdtModel, x: np.ndarray, background) -> Attribution:
    """Shapley attribution of one row's raw margin against a background.

    ``background`` may be a RecordTable or a matrix; covers are counted by
    routing it through every tree.
    """
    if isinstance(background, RecordTable):
        background = sample_background(background)
    covers = tree_covers(model, np.asarray(background, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    phi, base = shap_matrix(model, x, covers)
    from .trees import gbdt_margin

    prediction = float(gbdt_margin(model, x)[0])
    return Attribution(base_value=base, values=phi[0], prediction=prediction,
                       feature_names=model.feature_names)


def global_importance(model: GbdtModel, table: RecordTable,
                      background: np.ndarray | None = None,
                      seed: int = 0) -> list[tuple[str, float]]:
    """Mean |attribution| per feature over all rows, sorted descending.

    Ties keep feature order, so the ranking is stable. The background
    defaults to the table itself (capped).
    """
    if table.n_patients == 0:
        raise DomainError("importance needs a non-empty table")
    if background is None:
        background = sample_background(table, seed=seed)
    covers = tree_covers(model, background)
    phi, _ = shap_matrix(model, table.values, covers)
    mean_abs = np.mean(np.abs(phi), axis=0)
    order = np.argsort(-mean_abs, kind="stable")
    return [(model.feature_names[i], float(mean_abs[i])) for i in order]
