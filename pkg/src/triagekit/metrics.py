"""Classification and regression metrics with exact, oracle-checkable
definitions: rank-statistic ROC AUC with midrank tie handling, average
precision for the PR integral, Youden-J operating threshold, and the
regression baseline comparison used in the final report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


def _check_binary(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if not np.isin(labels, (0, 1)).all():
        raise DomainError("labels must be 0/1")
    if labels.min() == labels.max():
        raise DomainError("both classes must be present")
    return labels.astype(np.int8)


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """P(score of a positive > score of a negative) + half the tie mass."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = _check_binary(labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    ranks = _midranks(scores)
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_curve(scores, labels) -> list[tuple[float, float]]:
    """(fpr, tpr) points over descending score thresholds, from (0,0) to (1,1)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = _check_binary(labels)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    points = [(0.0, 0.0)]
    tp = fp = 0
    for i in range(labels.size):
        tp += int(sorted_labels[i] == 1)
        fp += int(sorted_labels[i] == 0)
        if i + 1 < labels.size and sorted_scores[i + 1] == sorted_scores[i]:
            continue
        points.append((fp / n_neg, tp / n_pos))
    return points


def pr_curve(scores, labels) -> list[tuple[float, float]]:
    """(recall, precision) points over descending score thresholds."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = _check_binary(labels)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    n_pos = int(labels.sum())
    points = []
    tp = 0
    for i in range(labels.size):
        tp += int(sorted_labels[i] == 1)
        if i + 1 < labels.size and sorted_scores[i + 1] == sorted_scores[i]:
            continue
        points.append((tp / n_pos, tp / (i + 1)))
    return points


def pr_auc(scores, labels) -> float:
    """Average precision: sum of (R_i - R_{i-1}) * P_i over thresholds."""
    points = pr_curve(scores, labels)
    total = 0.0
    prev_recall = 0.0
    for recall, precision in points:
        total += (recall - prev_recall) * precision
        prev_recall = recall
    return float(total)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int


def classify_metrics(scores, labels, threshold: float) -> tuple[float, float, ConfusionCounts]:
    """(balanced accuracy, F1, confusion counts) at score >= threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = _check_binary(labels)
    predicted = scores >= threshold
    tp = int(np.sum(predicted & (labels == 1)))
    fp = int(np.sum(predicted & (labels == 0)))
    tn = int(np.sum(~predicted & (labels == 0)))
    fn = int(np.sum(~predicted & (labels == 1)))
    tpr = tp / (tp + fn) if tp + fn else 0.0
    tnr = tn / (tn + fp) if tn + fp else 0.0
    balanced = 0.5 * (tpr + tnr)
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
    return balanced, f1, ConfusionCounts(tp, fp, tn, fn)


def best_threshold(scores, labels) -> float:
    """Score cutoff maximizing Youden's J = TPR - FPR.

    Candidates are midpoints between consecutive distinct scores plus the
    all-positive / all-negative extremes; ties resolve to the lowest
    candidate. Perfect separation therefore returns the midpoint of the gap.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = _check_binary(labels)
    distinct = np.unique(scores)
    candidates = [distinct[0] - 1.0]
    candidates.extend((distinct[:-1] + distinct[1:]) / 2.0)
    candidates.append(distinct[-1] + 1.0)

    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    best_j = -math.inf
    best_t = candidates[0]
    for t in candidates:
        predicted = scores >= t
        tpr = np.sum(predicted & (labels == 1)) / n_pos
        fpr = np.sum(predicted & (labels == 0)) / n_neg
        j = tpr - fpr
        if j > best_j:
            best_j = j
            best_t = t
    return float(best_t)


def brier(probs, labels) -> float:
    """Mean squared difference between predicted probability and outcome."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if ((probs < 0.0) | (probs > 1.0)).any() or np.isnan(probs).any():
        raise DomainError("probabilities must lie in [0, 1]")
    return float(np.mean((probs - labels) ** 2))


def reliability_curve(probs, labels, n_bins: int = 10) -> list[tuple[float, float, int]]:
    """(mean predicted prob, empirical positive rate, count) per non-empty
    equal-width bin over [0, 1]; bins partition the sample exactly."""
    if n_bins < 2:
        raise DomainError("n_bins must be >= 2")
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if ((probs < 0.0) | (probs > 1.0)).any():
        raise DomainError("probabilities must lie in [0, 1]")
    bins = np.minimum((probs * n_bins).astype(int), n_bins - 1)
    points = []
    for b in range(n_bins):
        mask = bins == b
        count = int(mask.sum())
        if count == 0:
            continue
        points.append((float(probs[mask].mean()), float(labels[mask].mean()), count))
    return points


def regress_metrics(pred, truth, baseline_pred) -> dict:
    """RMSE / MAE / R^2 for the model and a baseline, plus the percentage
    improvement over that baseline per error metric."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    baseline_pred = np.asarray(baseline_pred, dtype=np.float64)
    if pred.shape != truth.shape or baseline_pred.shape != truth.shape:
        raise DomainError("prediction, truth and baseline must have equal length")

    def _rmse(a):
        return float(np.sqrt(np.mean((a - truth) ** 2)))

    def _mae(a):
        return float(np.mean(np.abs(a - truth)))

    sst = float(np.sum((truth - truth.mean()) ** 2))
    out = {
        "rmse": _rmse(pred),
        "mae": _mae(pred),
        "baseline_rmse": _rmse(baseline_pred),
        "baseline_mae": _mae(baseline_pred),
    }
    if sst == 0.0:
        out["r2"] = math.nan
        out["r2_defined"] = False
    else:
        out["r2"] = 1.0 - float(np.sum((truth - pred) ** 2)) / sst
        out["r2_defined"] = True
    out["improvement_pct"] = {
        "rmse": _improvement(out["baseline_rmse"], out["rmse"]),
        "mae": _improvement(out["baseline_mae"], out["mae"]),
    }
    return out


def _improvement(baseline: float, model: float) -> float:
    if baseline == 0.0:
        return math.nan
    return (baseline - model) / baseline * 100.0


@dataclass
class MetricsReport:
    """Everything the evaluate step emits for one task."""

    task: str
    classify: dict = field(default_factory=dict)
    regress: dict = field(default_factory=dict)
    roc: list = field(default_factory=list)
    pr: list = field(default_factory=list)
    reliability: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"task": self.task}
        if self.classify:
            out.update(self.classify)
        if self.regress:
            out.update(self.regress)
        return out


def classifier_report(probs, labels, n_bins: int = 10) -> MetricsReport:
    """Bundle every classifier metric and curve for a score/label set."""
    threshold = best_threshold(probs, labels)
    balanced, f1, counts = classify_metrics(probs, labels, threshold)
    report = MetricsReport(task="special_care")
    report.classify = {
        "roc_auc": roc_auc(probs, labels),
        "pr_auc": pr_auc(probs, labels),
        "brier": brier(probs, labels),
        "best_threshold": threshold,
        "balanced_accuracy": balanced,
        "f1": f1,
        "confusion": {"tp": counts.tp, "fp": counts.fp, "tn": counts.tn, "fn": counts.fn},
    }
    report.roc = roc_curve(probs, labels)
    report.pr = pr_curve(probs, labels)
    report.reliability = reliability_curve(probs, labels, n_bins)
    return report


def regressor_report(pred, truth, baseline_pred) -> MetricsReport:
    report = MetricsReport(task="days")
    report.regress = regress_metrics(pred, truth, baseline_pred)
    return report
