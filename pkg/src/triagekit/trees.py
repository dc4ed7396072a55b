"""Sparsity-aware decision trees, bagged forests and gradient-boosted
ensembles, built from scratch on flat node arrays.

Missing cells stay NaN all the way through training: every node learns a
default direction for rows lacking its split feature, so no sentinel fill
is ever needed. ``subsample`` is the fraction of features drawn per tree
(that is what the tuning grid's description says it controls, despite the
usual row-fraction reading of the name).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _tree_kernels as kernels
from .errors import DomainError, SchemaError


@dataclass(frozen=True)
class GbdtParams:
    eta: float = 0.3
    gamma: float = 0.0
    max_depth: int = 6
    subsample: float = 1.0
    lambda_: float = 1.0
    alpha: float = 0.0
    n_estimators: int = 100

    def __post_init__(self) -> None:
        for name in ("eta", "gamma", "subsample", "lambda_", "alpha"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite")
        if self.eta <= 0:
            raise DomainError("eta must be positive")
        if self.gamma < 0 or self.lambda_ < 0 or self.alpha < 0:
            raise DomainError("gamma, lambda and alpha must be non-negative")
        if not 0 < self.subsample <= 1:
            raise DomainError("subsample must lie in (0, 1]")
        if int(self.max_depth) != self.max_depth or self.max_depth < 1:
            raise DomainError("max_depth must be a positive integer")
        if int(self.n_estimators) != self.n_estimators or self.n_estimators < 0:
            raise DomainError("n_estimators must be a non-negative integer")

    def to_dict(self) -> dict:
        return {
            "eta": self.eta, "gamma": self.gamma, "max_depth": int(self.max_depth),
            "subsample": self.subsample, "lambda": self.lambda_, "alpha": self.alpha,
            "n_estimators": int(self.n_estimators),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtParams":
        return cls(eta=d["eta"], gamma=d["gamma"], max_depth=int(d["max_depth"]),
                   subsample=d["subsample"], lambda_=d["lambda"], alpha=d["alpha"],
                   n_estimators=int(d["n_estimators"]))


def split_gain(GL: float, HL: float, GR: float, HR: float,
               lambda_: float, gamma: float) -> float:
    """Loss reduction of a candidate split; a split is taken only if > 0."""
    total = (GL + GR) ** 2 / (HL + HR + lambda_)
    return 0.5 * (GL * GL / (HL + lambda_) + GR * GR / (HR + lambda_) - total) - gamma


def leaf_weight(G: float, H: float, lambda_: float, alpha: float) -> float:
    """Minimizer of G*w + (H + lambda)/2 * w^2 + alpha*|w|."""
    mag = abs(G) - alpha
    if mag <= 0.0:
        return 0.0
    w = mag / (H + lambda_)
    return -w if G > 0 else w


@dataclass(frozen=True)
class DecisionTree:
    """Flat node arrays; ``feature[k] < 0`` marks a leaf with value ``weight[k]``."""

    feature: np.ndarray
    threshold: np.ndarray
    default_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def depth(self) -> int:
        depths = {0: 0}
        deepest = 0
        for k in range(self.n_nodes):
            if self.feature[k] >= 0:
                depths[int(self.left[k])] = depths[k] + 1
                depths[int(self.right[k])] = depths[k] + 1
                deepest = max(deepest, depths[k] + 1)
        return deepest

    def predict_into(self, X: np.ndarray, out: np.ndarray) -> None:
        kernels.predict_tree(X, self.feature, self.threshold, self.default_left,
                             self.left, self.right, self.weight, out)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "default_left": self.default_left.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "weight": self.weight.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int32),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            default_left=np.asarray(d["default_left"], dtype=np.uint8),
            left=np.asarray(d["left"], dtype=np.int32),
            right=np.asarray(d["right"], dtype=np.int32),
            weight=np.asarray(d["weight"], dtype=np.float64),
        )


def fit_tree(X: np.ndarray, grad: np.ndarray, hess: np.ndarray, params: GbdtParams,
             feature_subset: np.ndarray | None = None, seed: int = 0,
             mtry: int = 0, eta: float | None = None) -> DecisionTree:
    """Grow one tree on the given gradients/hessians.

    ``feature_subset`` restricts candidate features (indices into X's
    columns); node arrays always store global column indices. The leaf
    weights come out scaled by ``eta`` (params.eta unless overridden).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    grad = np.ascontiguousarray(grad, dtype=np.float64)
    hess = np.ascontiguousarray(hess, dtype=np.float64)
    if X.shape[0] != grad.size or grad.size != hess.size:
        raise DomainError("X, grad and hess must agree on row count")
    if (hess < 0).any():
        raise DomainError("hessians must be non-negative")

    if feature_subset is None:
        subset = np.arange(X.shape[1], dtype=np.int64)
        X_local = X
    else:
        subset = np.asarray(feature_subset, dtype=np.int64)
        X_local = np.ascontiguousarray(X[:, subset])

    max_nodes = min(2 ** (min(int(params.max_depth), 24) + 1), 2 * X.shape[0] + 2)
    arrays = kernels.grow_tree(
        X_local, grad, hess, int(params.max_depth), float(params.lambda_),
        float(params.alpha), float(params.gamma),
        float(params.eta if eta is None else eta), int(mtry), int(seed), max_nodes,
    )
    feature, threshold, default_left, left, right, weight = arrays
    remapped = feature.copy()
    internal = feature >= 0
    remapped[internal] = subset[feature[internal]].astype(np.int32)
    return DecisionTree(remapped, threshold, default_left, left, right, weight)


@dataclass(frozen=True)
class GbdtModel:
    params: GbdtParams
    loss: str  # logistic | squared
    base_score: float
    trees: tuple[DecisionTree, ...]
    feature_names: tuple[str, ...]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "loss": self.loss,
            "base_score": self.base_score,
            "feature_names": list(self.feature_names),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtModel":
        return cls(
            params=GbdtParams.from_dict(d["params"]),
            loss=d["loss"],
            base_score=d["base_score"],
            trees=tuple(DecisionTree.from_dict(t) for t in d["trees"]),
            feature_names=tuple(d["feature_names"]),
        )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def gbdt_fit(X: np.ndarray, y: np.ndarray, params: GbdtParams, loss: str,
             seed: int = 0, feature_names: tuple[str, ...] | None = None) -> GbdtModel:
    """Second-order boosting: per round, compute grad/hess of the loss at
    the current margins, draw ceil(subsample * n_features) features without
    replacement, grow a tree, add it. Deterministic for a given seed."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("gbdt_fit needs a non-empty 2-D matrix")
    if X.shape[0] != y.size:
        raise DomainError("one target per row required")
    if loss == "logistic":
        if not np.isin(y, (0.0, 1.0)).all():
            raise DomainError("logistic loss needs 0/1 targets")
        mean = min(max(float(y.mean()), 1e-12), 1.0 - 1e-12)
        base = math.log(mean / (1.0 - mean))
    elif loss == "squared":
        if not np.isfinite(y).all():
            raise DomainError("squared loss needs finite targets")
        base = float(y.mean())
    else:
        raise DomainError(f"unknown loss {loss!r}")

    if feature_names is None:
        feature_names = tuple(f"f{j}" for j in range(X.shape[1]))

    rng = np.random.default_rng(seed)
    n_features = X.shape[1]
    k = max(1, math.ceil(params.subsample * n_features))

    margins = np.full(X.shape[0], base)
    trees: list[DecisionTree] = []
    for _ in range(int(params.n_estimators)):
        if loss == "logistic":
            p = _sigmoid(margins)
            grad = p - y
            hess = p * (1.0 - p)
        else:
            grad = margins - y
            hess = np.ones_like(y)
        if k < n_features:
            subset = np.sort(rng.choice(n_features, size=k, replace=False))
        else:
            subset = None
        tree = fit_tree(X, grad, hess, params, feature_subset=subset)
        tree.predict_into(X, margins)
        trees.append(tree)

    return GbdtModel(params=params, loss=loss, base_score=base,
                     trees=tuple(trees), feature_names=tuple(feature_names))


def gbdt_margin(model: GbdtModel, X: np.ndarray) -> np.ndarray:
    """Raw additive margin: base_score plus the sum of leaf weights."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise SchemaError(
            f"expected {model.n_features} features, got {X.shape[1] if X.ndim == 2 else 'non-2D'}"
        )
    out = np.full(X.shape[0], model.base_score)
    for tree in model.trees:
        tree.predict_into(X, out)
    return out


def gbdt_predict(model: GbdtModel, X: np.ndarray) -> np.ndarray:
    """Probability for logistic models, raw margin for squared models."""
    margin = gbdt_margin(model, X)
    if model.loss == "logistic":
        return _sigmoid(margin)
    return margin


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[DecisionTree, ...]
    n_features: int


def rf_fit(X: np.ndarray, y: np.ndarray, n_trees: int = 100, max_depth: int = 6,
           seed: int = 0, bootstrap: bool = True, max_features: str = "sqrt") -> ForestModel:
    """Bagged regression-to-the-target trees: bootstrap rows per tree,
    sqrt(p) features per split, mean aggregation (class fraction doubles as
    the positive probability for 0/1 targets)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DomainError("rf_fit needs a non-empty 2-D matrix")
    n, p = X.shape
    mtry = max(1, int(round(math.sqrt(p)))) if max_features == "sqrt" else 0
    # single tree on the raw targets: leaf value = mean(y) at the leaf
    params = GbdtParams(eta=1.0, gamma=0.0, max_depth=max_depth, subsample=1.0,
                        lambda_=0.0, alpha=0.0, n_estimators=1)
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_trees):
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        tree_seed = int(rng.integers(0, 2 ** 31 - 1))
        Xb = np.ascontiguousarray(X[rows])
        yb = y[rows]
        trees.append(fit_tree(Xb, -yb, np.ones(yb.size), params,
                              seed=tree_seed, mtry=mtry))
    return ForestModel(trees=tuple(trees), n_features=p)


def rf_predict(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Average of per-tree outputs."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise SchemaError(f"expected {model.n_features} features")
    out = np.zeros(X.shape[0])
    for tree in model.trees:
        tree.predict_into(X, out)
    return out / len(model.trees)
