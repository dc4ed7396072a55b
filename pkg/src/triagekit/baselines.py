"""Screening candidates and trivial baselines for the model bake-off.

Each family is fit with fixed, documented defaults and no tuning. Dense
families see median-imputed data; tree families take the sparse matrix
as-is. Probabilistic classifiers return the class-1 probability.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import trees
from .dataset import RecordTable
from .errors import DomainError
from .folds import plain_kfold, stratified_kfold
from .impute import fit as impute_fit, transform as impute_transform
from .metrics import classify_metrics, regress_metrics, roc_auc

CLASSIFY_FAMILIES = ("gaussian_nb", "bernoulli_nb", "lda", "qda", "logistic",
                     "decision_tree", "random_forest", "gbdt", "coin")
REGRESS_FAMILIES = ("linear", "huber", "decision_tree", "random_forest", "gbdt", "mean")

#: families that accept NaN cells natively (no imputation in screening)
SPARSE_OK = ("decision_tree", "random_forest", "gbdt", "coin", "mean")


@dataclass(frozen=True)
class CandidateSpec:
    name: str
    task: str    # classify | regress
    family: str
    l2: float = 0.0       # logistic
    l1: float = 0.0       # logistic
    delta: float = 1.35   # huber

    def __post_init__(self) -> None:
        allowed = CLASSIFY_FAMILIES if self.task == "classify" else REGRESS_FAMILIES
        if self.task not in ("classify", "regress"):
            raise DomainError(f"unknown task {self.task!r}")
        if self.family not in allowed:
            raise DomainError(f"family {self.family!r} incompatible with task {self.task!r}")


@dataclass
class LeaderboardRow:
    name: str
    metrics: dict = field(default_factory=dict)
    time_taken: float = 0.0
    error: str = ""


def default_candidates(task: str) -> list[CandidateSpec]:
    if task == "classify":
        return [
            CandidateSpec("Gaussian Naive Bayes", "classify", "gaussian_nb"),
            CandidateSpec("Bernoulli Naive Bayes", "classify", "bernoulli_nb"),
            CandidateSpec("LDA", "classify", "lda"),
            CandidateSpec("QDA", "classify", "qda"),
            CandidateSpec("Logistic Regression", "classify", "logistic", l2=1.0),
            CandidateSpec("Lasso Logistic", "classify", "logistic", l1=1.0),
            CandidateSpec("Decision Tree", "classify", "decision_tree"),
            CandidateSpec("Random Forest", "classify", "random_forest"),
            CandidateSpec("Boosted Trees", "classify", "gbdt"),
            CandidateSpec("Coin", "classify", "coin"),
        ]
    return [
        CandidateSpec("Linear Regression", "regress", "linear"),
        CandidateSpec("Huber Regression", "regress", "huber"),
        CandidateSpec("Decision Tree", "regress", "decision_tree"),
        CandidateSpec("Random Forest", "regress", "random_forest"),
        CandidateSpec("Boosted Trees", "regress", "gbdt"),
        CandidateSpec("Mean", "regress", "mean"),
    ]


def _standardize(train: np.ndarray, test: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd[sd == 0.0] = 1.0
    return (train - mu) / sd, (test - mu) / sd


def _gaussian_nb(train_X, train_y, test_X):
    out_log = np.zeros((test_X.shape[0], 2))
    for c in (0, 1):
        Xc = train_X[train_y == c]
        mu = Xc.mean(axis=0)
        var = Xc.var(axis=0) + 1e-9
        prior = Xc.shape[0] / train_X.shape[0]
        ll = -0.5 * np.sum(np.log(2 * math.pi * var) + (test_X - mu) ** 2 / var, axis=1)
        out_log[:, c] = ll + math.log(prior)
    return _softmax_pair(out_log)


def _bernoulli_nb(train_X, train_y, test_X):
    # continuous labs binarized at the per-feature training median
    med = np.median(train_X, axis=0)
    B_train = (train_X > med).astype(np.float64)
    B_test = (test_X > med).astype(np.float64)
    out_log = np.zeros((test_X.shape[0], 2))
    for c in (0, 1):
        Bc = B_train[train_y == c]
        # Laplace smoothing 1.0
        theta = (Bc.sum(axis=0) + 1.0) / (Bc.shape[0] + 2.0)
        prior = Bc.shape[0] / train_X.shape[0]
        ll = np.sum(B_test * np.log(theta) + (1 - B_test) * np.log1p(-theta), axis=1)
        out_log[:, c] = ll + math.log(prior)
    return _softmax_pair(out_log)


def _softmax_pair(log_scores: np.ndarray) -> np.ndarray:
    shifted = log_scores - log_scores.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    return ex[:, 1] / ex.sum(axis=1)


def _discriminant(train_X, train_y, test_X, pooled: bool):
    p = train_X.shape[1]
    out_log = np.zeros((test_X.shape[0], 2))
    covs = []
    for c in (0, 1):
        Xc = train_X[train_y == c]
        centered = Xc - Xc.mean(axis=0)
        covs.append(centered.T @ centered / max(Xc.shape[0] - 1, 1))
    if pooled:
        n0 = (train_y == 0).sum()
        n1 = (train_y == 1).sum()
        pooled_cov = (covs[0] * (n0 - 1) + covs[1] * (n1 - 1)) / max(n0 + n1 - 2, 1)
        covs = [pooled_cov, pooled_cov]
    for c in (0, 1):
        Xc = train_X[train_y == c]
        mu = Xc.mean(axis=0)
        cov = covs[c]
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            warnings.warn("singular covariance; adding ridge jitter 1e-6")
            chol = np.linalg.cholesky(cov + 1e-6 * np.eye(p))
        diff = test_X - mu
        z = np.linalg.solve(chol, diff.T)
        maha = np.sum(z * z, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        prior = Xc.shape[0] / train_X.shape[0]
        out_log[:, c] = -0.5 * (maha + logdet) + math.log(prior)
    return _softmax_pair(out_log)


def _logistic(train_X, train_y, test_X, l1: float, l2: float,
              iters: int = 500, step: float = 0.1):
    Xs, Ts = _standardize(train_X, test_X)
    Xs = np.hstack([Xs, np.ones((Xs.shape[0], 1))])
    Ts = np.hstack([Ts, np.ones((Ts.shape[0], 1))])
    n, p = Xs.shape
    w = np.zeros(p)
    for _ in range(iters):
        z = Xs @ w
        prob = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        grad = Xs.T @ (prob - train_y) / n
        grad[:-1] += l2 * w[:-1] / n  # intercept unpenalized
        w -= step * grad
        if l1 > 0:  # proximal soft-threshold
            thr = step * l1 / n
            w[:-1] = np.sign(w[:-1]) * np.maximum(np.abs(w[:-1]) - thr, 0.0)
    z = Ts @ w
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def logistic_coefficients(train_X, train_y, l1: float = 0.0, l2: float = 0.0):
    """Fitted weights (excluding intercept) on standardized features."""
    Xs, _ = _standardize(train_X, train_X)
    Xs = np.hstack([Xs, np.ones((Xs.shape[0], 1))])
    n, p = Xs.shape
    w = np.zeros(p)
    for _ in range(500):
        z = Xs @ w
        prob = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        grad = Xs.T @ (prob - train_y) / n
        grad[:-1] += l2 * w[:-1] / n
        w -= 0.1 * grad
        if l1 > 0:
            thr = 0.1 * l1 / n
            w[:-1] = np.sign(w[:-1]) * np.maximum(np.abs(w[:-1]) - thr, 0.0)
    return w[:-1]


def _linear(train_X, train_y, test_X):
    A = np.hstack([train_X, np.ones((train_X.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(A, train_y, rcond=None)
    return np.hstack([test_X, np.ones((test_X.shape[0], 1))]) @ coef


def _huber(train_X, train_y, test_X, delta: float, iters: int = 50):
    # iteratively reweighted least squares with Huber weights
    Xs, Ts = _standardize(train_X, test_X)
    A = np.hstack([Xs, np.ones((Xs.shape[0], 1))])
    T = np.hstack([Ts, np.ones((Ts.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(A, train_y, rcond=None)
    for _ in range(iters):
        r = train_y - A @ coef
        absr = np.abs(r)
        w = np.where(absr <= delta, 1.0, delta / np.maximum(absr, 1e-12))
        Aw = A * w[:, None]
        coef_new, *_ = np.linalg.lstsq(Aw.T @ A + 1e-10 * np.eye(A.shape[1]),
                                       Aw.T @ train_y, rcond=None)
        if np.max(np.abs(coef_new - coef)) < 1e-10:
            coef = coef_new
            break
        coef = coef_new
    return T @ coef


def fit_predict(spec: CandidateSpec, train_X, train_y, test_X, seed: int = 0) -> np.ndarray:
    """Fit one candidate on (train_X, train_y) and score test_X."""
    train_X = np.asarray(train_X, dtype=np.float64)
    test_X = np.asarray(test_X, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.float64)
    family = spec.family

    if family == "coin":
        return np.random.default_rng(seed).random(test_X.shape[0])
    if family == "mean":
        return np.full(test_X.shape[0], float(train_y.mean()))
    if family == "gaussian_nb":
        return _gaussian_nb(train_X, train_y, test_X)
    if family == "bernoulli_nb":
        return _bernoulli_nb(train_X, train_y, test_X)
    if family == "lda":
        return _discriminant(train_X, train_y, test_X, pooled=True)
    if family == "qda":
        return _discriminant(train_X, train_y, test_X, pooled=False)
    if family == "logistic":
        return _logistic(train_X, train_y, test_X, l1=spec.l1, l2=spec.l2)
    if family == "linear":
        return _linear(train_X, train_y, test_X)
    if family == "huber":
        return _huber(train_X, train_y, test_X, delta=spec.delta)
    if family == "decision_tree":
        params = trees.GbdtParams(eta=1.0, gamma=0.0, max_depth=6, subsample=1.0,
                                  lambda_=0.0, alpha=0.0, n_estimators=1)
        tree = trees.fit_tree(train_X, -train_y, np.ones(train_y.size), params)
        out = np.zeros(test_X.shape[0])
        tree.predict_into(np.ascontiguousarray(test_X), out)
        return out
    if family == "random_forest":
        forest = trees.rf_fit(train_X, train_y, n_trees=100, max_depth=6, seed=seed)
        return trees.rf_predict(forest, test_X)
    if family == "gbdt":
        loss = "logistic" if spec.task == "classify" else "squared"
        model = trees.gbdt_fit(train_X, train_y, trees.GbdtParams(), loss, seed=seed)
        return trees.gbdt_predict(model, test_X)
    raise DomainError(f"unknown family {family!r}")


def screen(candidates: list[CandidateSpec], table: RecordTable, cv_folds: int = 5,
           seed: int = 0) -> list[LeaderboardRow]:
    """Cross-validated bake-off; classification rows sort by ROC AUC
    descending, regression rows by RMSE ascending. A failing candidate is
    recorded with an error note instead of aborting the run."""
    if cv_folds < 2:
        raise DomainError("need at least 2 folds")
    if not candidates:
        return []
    task = candidates[0].task
    if any(c.task != task for c in candidates):
        raise DomainError("mixed-task candidate lists are not supported")

    if task == "classify":
        if table.special_care is None:
            raise DomainError("classification screening needs special_care labels")
        y = table.special_care.astype(np.float64)
        folds = stratified_kfold(table.special_care, cv_folds, seed)
    else:
        if table.days is None:
            raise DomainError("regression screening needs the days target")
        y = table.days
        folds = plain_kfold(table.n_patients, cv_folds, seed)

    X = table.values
    all_rows = np.arange(table.n_patients)

    # one shared median imputation per fold for the dense-only families
    dense_splits = []
    for fold in folds:
        train_mask = ~np.isin(all_rows, fold)
        train_table = table.select_rows(np.flatnonzero(train_mask))
        imputer = impute_fit("median", train_table)
        dense_train = impute_transform(imputer, train_table).values
        dense_test = impute_transform(imputer, table.select_rows(fold)).values
        dense_splits.append((np.flatnonzero(train_mask), fold, dense_train, dense_test))

    rows = []
    for ci, spec in enumerate(candidates):
        started = time.perf_counter()
        fold_metrics: list[dict] = []
        note = ""
        try:
            for fi, (train_idx, test_idx, dense_train, dense_test) in enumerate(dense_splits):
                if spec.family in SPARSE_OK:
                    tr_X, te_X = X[train_idx], X[test_idx]
                else:
                    tr_X, te_X = dense_train, dense_test
                scores = fit_predict(spec, tr_X, y[train_idx], te_X,
                                     seed=seed * 1000 + ci * 37 + fi)
                if task == "classify":
                    balanced, f1, _ = classify_metrics(scores, table.special_care[test_idx], 0.5)
                    fold_metrics.append({
                        "Balanced Accuracy": balanced,
                        "ROC AUC": roc_auc(scores, table.special_care[test_idx]),
                        "F1 Score": f1,
                    })
                else:
                    m = regress_metrics(scores, y[test_idx],
                                        np.full(test_idx.size, y[train_idx].mean()))
                    fold_metrics.append({"R-Squared": m["r2"], "RMSE": m["rmse"]})
        except Exception as exc:  # candidate failure must not abort the run
            note = f"{type(exc).__name__}: {exc}"
            fold_metrics = []
        elapsed = time.perf_counter() - started
        if fold_metrics:
            merged = {k: float(np.mean([fm[k] for fm in fold_metrics]))
                      for k in fold_metrics[0]}
        else:
            merged = {}
        rows.append(LeaderboardRow(name=spec.name, metrics=merged,
                                   time_taken=elapsed, error=note))

    def sort_key(row: LeaderboardRow):
        if row.error:
            return (1, 0.0)
        if task == "classify":
            return (0, -row.metrics["ROC AUC"])
        return (0, row.metrics["RMSE"])

    return sorted(rows, key=sort_key)


def write_leaderboard_csv(path, rows: list[LeaderboardRow], task: str) -> None:
    """Screening leaderboard CSV (plus a trailing error column)."""
    if task == "classify":
        header = ["Model", "Balanced Accuracy", "ROC AUC", "F1 Score", "Time Taken (s)", "Error"]
        keys = ["Balanced Accuracy", "ROC AUC", "F1 Score"]
    else:
        header = ["Model", "R-Squared", "RMSE", "Time Taken (s)", "Error"]
        keys = ["R-Squared", "RMSE"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            cells = [row.name]
            for k in keys:
                cells.append("" if k not in row.metrics else f"{row.metrics[k]:.17g}")
            cells.append(f"{row.time_taken:.4f}")
            cells.append(row.error)
            writer.writerow(cells)
