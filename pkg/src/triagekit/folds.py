"""Deterministic cross-validation fold assignment."""

from __future__ import annotations

import numpy as np

from .errors import DomainError


def stratified_kfold(labels: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle within each class, round-robin assignment.

    Raises if any fold misses a class (minority too small for k folds).
    """
    if k < 2:
        raise DomainError("need at least 2 folds")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        for i, row in enumerate(idx):
            folds[i % k].append(int(row))
    out = [np.sort(np.array(f, dtype=np.int64)) for f in folds]
    for fold in out:
        if np.unique(labels[fold]).size < np.unique(labels).size:
            raise DomainError(
                "a fold lost a class; use fewer folds or more minority rows"
            )
    return out


def plain_kfold(n: int, k: int, seed: int) -> list[np.ndarray]:
    if k < 2:
        raise DomainError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    idx = np.arange(n)
    rng.shuffle(idx)
    return [np.sort(chunk) for chunk in np.array_split(idx, k)]
