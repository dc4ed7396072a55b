"""SMOTE minority oversampling with optional majority under-sampling.

Applies to the special-care classifier only; the days regressor is trained
on the raw class balance. Runs on dense (post-imputation) matrices and
must be called inside training folds only, never on validation folds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    target_ratio: float = 1.0          # desired minority/majority count ratio
    undersample_majority: float = 1.0  # fraction of majority rows kept
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k_neighbors < 1:
            raise DomainError("k_neighbors must be >= 1")
        if not 0.0 < self.target_ratio <= 1.0:
            raise DomainError("target_ratio must lie in (0, 1]")
        if not 0.0 < self.undersample_majority <= 1.0:
            raise DomainError("undersample_majority must lie in (0, 1]")


def smote_resample(X: np.ndarray, y: np.ndarray, cfg: SmoteConfig) -> tuple[np.ndarray, np.ndarray]:
    """Resample (X, y) to the configured minority/majority ratio.

    Majority rows are subsampled without replacement; synthetic minority
    rows are drawn as x + u * (nn - x) with x a random minority row, nn one
    of its k nearest minority neighbours (Euclidean on unit-variance
    standardized features) and u uniform on [0, 1). Original minority rows
    are always retained. Deterministic for a given seed.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DomainError("X must be 2-D with one label per row")
    if np.isnan(X).any():
        raise DomainError("SMOTE needs a dense matrix; impute first")

    classes, counts = np.unique(y, return_counts=True)
    if classes.size != 2:
        raise DomainError("SMOTE needs exactly two classes present")
    minority_label = classes[np.argmin(counts)]
    minority = np.flatnonzero(y == minority_label)
    majority = np.flatnonzero(y != minority_label)
    if minority.size < 2:
        raise DomainError("minority class needs at least 2 rows")

    rng = np.random.default_rng(cfg.seed)

    n_keep = max(1, int(round(cfg.undersample_majority * majority.size)))
    if n_keep < majority.size:
        kept = np.sort(rng.choice(majority, size=n_keep, replace=False))
    else:
        kept = majority

    desired_minority = int(round(cfg.target_ratio * kept.size))
    n_synthetic = max(0, desired_minority - minority.size)

    X_min = X[minority]
    synthetic = np.empty((n_synthetic, X.shape[1]))
    if n_synthetic > 0:
        k = min(cfg.k_neighbors, minority.size - 1)
        # distances on unit-variance features so no lab scale dominates
        scale = X_min.std(axis=0)
        scale[scale == 0.0] = 1.0
        Z = X_min / scale
        sq = np.sum(Z * Z, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T)
        np.fill_diagonal(d2, np.inf)
        neighbors = np.argsort(d2, axis=1, kind="stable")[:, :k]

        base = rng.integers(0, minority.size, size=n_synthetic)
        pick = rng.integers(0, k, size=n_synthetic)
        u = rng.random(n_synthetic)
        for i in range(n_synthetic):
            x = X_min[base[i]]
            nn = X_min[neighbors[base[i], pick[i]]]
            synthetic[i] = x + u[i] * (nn - x)

    X_out = np.vstack([X[kept], X_min, synthetic])
    y_out = np.concatenate([
        y[kept],
        np.full(minority.size, minority_label, dtype=y.dtype),
        np.full(n_synthetic, minority_label, dtype=y.dtype),
    ])
    return X_out, y_out
