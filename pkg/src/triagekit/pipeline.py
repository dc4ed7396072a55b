"""End-to-end training pipelines for the two targets.

The classifier path is median-impute -> SMOTE -> logistic-loss GBDT; the
days path is passthrough (trees handle NaN natively) -> squared-loss GBDT
trained on all patients with days = 0 for those never in special care.
SMOTE and imputer fitting happen inside ``fit`` so cross-validation folds
never leak.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import calibrate, impute, trees
from .dataset import RecordTable
from .errors import DomainError
from .folds import stratified_kfold
from .metrics import best_threshold
from .rebalance import SmoteConfig, smote_resample

TASKS = ("special_care", "days")


def task_kind(task: str) -> str:
    if task == "special_care":
        return "classify"
    if task == "days":
        return "regress"
    raise DomainError(f"unknown task {task!r}")


@dataclass
class TriagePipeline:
    """One imputer + one boosted ensemble for a single task."""

    task: str
    imputer_kind: str
    params: trees.GbdtParams
    smote: SmoteConfig | None = None
    seed: int = 0
    svd: impute.SvdConfig | None = None
    imputer: impute.ImputerModel | None = None
    model: trees.GbdtModel | None = None

    def fit(self, table: RecordTable) -> "TriagePipeline":
        kind = task_kind(self.task)
        self.imputer = impute.fit(self.imputer_kind, table, svd=self.svd)
        imputed = impute.transform(self.imputer, table)
        X = imputed.values
        if kind == "classify":
            if table.special_care is None:
                raise DomainError("classifier training needs special_care labels")
            y = table.special_care.astype(np.float64)
            if self.smote is not None:
                X, y = smote_resample(X, y, replace(self.smote, seed=self.seed))
            loss = "logistic"
        else:
            if table.days is None:
                raise DomainError("days training needs the days target")
            y = table.days
            loss = "squared"
        self.model = trees.gbdt_fit(X, y, self.params, loss, seed=self.seed,
                                    feature_names=tuple(table.feature_names()))
        return self

    def _imputed(self, table: RecordTable) -> np.ndarray:
        if self.imputer is None or self.model is None:
            raise DomainError("pipeline is not fitted")
        return impute.transform(self.imputer, table).values

    def scores(self, table: RecordTable) -> np.ndarray:
        """Positive-class probability (classify) or predicted days (regress)."""
        return trees.gbdt_predict(self.model, self._imputed(table))

    def margins(self, table: RecordTable) -> np.ndarray:
        return trees.gbdt_margin(self.model, self._imputed(table))


def split_holdout(table: RecordTable, fraction: float, seed: int) -> tuple[RecordTable, RecordTable]:
    """Seeded train/holdout split, stratified on the label when present."""
    if not 0.0 < fraction < 1.0:
        raise DomainError("holdout fraction must lie in (0, 1)")
    n = table.n_patients
    if table.special_care is not None:
        k = max(2, int(round(1.0 / fraction)))
        folds = stratified_kfold(table.special_care, k, seed)
        hold = folds[0]
    else:
        rng = np.random.default_rng(seed)
        idx = np.arange(n)
        rng.shuffle(idx)
        hold = np.sort(idx[: max(1, int(round(fraction * n)))])
    keep = np.setdiff1d(np.arange(n), hold)
    return table.select_rows(keep), table.select_rows(hold)


@dataclass
class TrainedTask:
    """A fitted pipeline plus the calibration byproducts the server needs.

    Calibrators consume the raw boosting margin (log-odds); their output is
    a probability. The operating threshold is stored in margin space, which
    maps monotonically onto either probability scale.
    """

    task: str
    pipeline: TriagePipeline
    calibrator: calibrate.CalibratorModel | None = None
    threshold_margin: float | None = None
    calibration_kind: str = "none"


def train_task(table: RecordTable, task: str, params: trees.GbdtParams,
               imputer_kind: str, seed: int, smote: SmoteConfig | None = None,
               calibration: str = "none", calibration_fraction: float = 0.2,
               svd: impute.SvdConfig | None = None) -> TrainedTask:
    """Train one task on the full training table.

    For the classifier, a calibration fold is carved out first so the
    calibrator (and the operating threshold) never see the boosted model's
    own training rows.
    """
    kind = task_kind(task)
    if kind == "regress" or calibration == "none":
        pipeline = TriagePipeline(task=task, imputer_kind=imputer_kind, params=params,
                                  smote=smote if kind == "classify" else None,
                                  seed=seed, svd=svd)
        pipeline.fit(table)
        threshold = None
        if kind == "classify":
            threshold = best_threshold(pipeline.margins(table), table.special_care)
        return TrainedTask(task=task, pipeline=pipeline, threshold_margin=threshold)

    if calibration not in ("platt", "isotonic"):
        raise DomainError(f"unknown calibration {calibration!r}")
    fit_table, calib_table = split_holdout(table, calibration_fraction, seed + 1)
    pipeline = TriagePipeline(task=task, imputer_kind=imputer_kind, params=params,
                              smote=smote, seed=seed, svd=svd)
    pipeline.fit(fit_table)
    margins = pipeline.margins(calib_table)
    labels = calib_table.special_care
    if calibration == "platt":
        calibrator = calibrate.platt_fit(margins, labels)
    else:
        calibrator = calibrate.isotonic_fit(margins, labels.astype(np.float64))
    threshold = best_threshold(margins, labels)
    return TrainedTask(task=task, pipeline=pipeline, calibrator=calibrator,
                       threshold_margin=threshold, calibration_kind=calibration)
