"""Missing-cell completion: passthrough, per-feature median, or iterative
soft-thresholded SVD. All strategies leave observed cells untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import RecordTable
from .errors import DomainError, SchemaError

KINDS = ("passthrough", "median", "soft_svd")


@dataclass(frozen=True)
class SvdConfig:
    rank: int = 10
    shrinkage: float = 0.0   # soft-threshold applied to singular values
    max_iter: int = 200
    tol: float = 1e-5

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise DomainError("soft_svd rank must be >= 1")
        if self.tol <= 0:
            raise DomainError("soft_svd tol must be > 0")
        if self.shrinkage < 0:
            raise DomainError("soft_svd shrinkage must be >= 0")


@dataclass(frozen=True)
class ImputerModel:
    kind: str
    feature_names: tuple[str, ...]
    medians: np.ndarray | None = None       # median kind
    column_means: np.ndarray | None = None  # soft_svd initialization
    svd: SvdConfig | None = None
    warnings: tuple[str, ...] = ()


def fit(kind: str, table: RecordTable, svd: SvdConfig | None = None) -> ImputerModel:
    """Fit an imputer of the given kind on a table.

    Median imputation stores the per-feature median of observed cells; a
    feature with no observations is recorded as fill-with-0 and reported in
    the model's warnings. Soft-SVD stores column means and its config;
    passthrough is stateless.
    """
    if kind not in KINDS:
        raise DomainError(f"unknown imputer kind {kind!r}")
    names = tuple(table.feature_names())
    if kind == "passthrough":
        return ImputerModel(kind="passthrough", feature_names=names)
    if table.n_patients == 0:
        raise DomainError(f"{kind} imputer needs a non-empty table")

    values = table.values
    observed_counts = (~np.isnan(values)).sum(axis=0)
    warnings: list[str] = []

    if kind == "median":
        medians = np.zeros(table.n_features)
        for j in range(table.n_features):
            if observed_counts[j] == 0:
                warnings.append(f"feature {names[j]!r} has no observations; filling with 0")
            else:
                medians[j] = np.median(values[~np.isnan(values[:, j]), j])
        medians.flags.writeable = False
        return ImputerModel(kind="median", feature_names=names, medians=medians,
                            warnings=tuple(warnings))

    config = svd or SvdConfig(rank=min(10, min(table.n_patients, table.n_features)))
    means = np.zeros(table.n_features)
    for j in range(table.n_features):
        if observed_counts[j] == 0:
            warnings.append(f"feature {names[j]!r} has no observations; initializing at 0")
        else:
            means[j] = np.mean(values[~np.isnan(values[:, j]), j])
    means.flags.writeable = False
    return ImputerModel(kind="soft_svd", feature_names=names, column_means=means,
                        svd=config, warnings=tuple(warnings))


def transform(model: ImputerModel, table: RecordTable,
              trace: list | None = None) -> RecordTable:
    """Fill missing cells; observed cells are never altered.

    ``trace``, when given, collects the per-iteration max-abs change of the
    soft-SVD fill (diagnostics for convergence checks).
    """
    if tuple(table.feature_names()) != model.feature_names:
        raise SchemaError("table features do not match the fitted imputer")
    if model.kind == "passthrough":
        return table
    if table.n_patients == 0:
        return table

    values = table.values.copy()
    missing = np.isnan(values)
    if not missing.any():
        return table.with_values(values)

    if model.kind == "median":
        for j in range(values.shape[1]):
            values[missing[:, j], j] = model.medians[j]
        return table.with_values(values)

    values[missing] = np.broadcast_to(model.column_means, values.shape)[missing]
    config = model.svd
    rank = min(config.rank, min(values.shape))
    for _ in range(config.max_iter):
        u, s, vt = np.linalg.svd(values, full_matrices=False)
        s = np.maximum(s - config.shrinkage, 0.0)
        reconstruction = (u[:, :rank] * s[:rank]) @ vt[:rank]
        delta = float(np.max(np.abs(reconstruction[missing] - values[missing])))
        values[missing] = reconstruction[missing]
        if trace is not None:
            trace.append(delta)
        if delta < config.tol:
            break
    return table.with_values(values)


def fit_transform(kind: str, table: RecordTable, svd: SvdConfig | None = None) -> tuple[ImputerModel, RecordTable]:
    model = fit(kind, table, svd=svd)
    return model, transform(model, table)
