"""Probability calibration: Platt scaling and isotonic regression.

Both calibrators must be fit on a fold disjoint from the data the model was
trained on; the training pipeline enforces that split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError


@dataclass(frozen=True)
class CalibratorModel:
    kind: str  # platt | isotonic
    a: float = 0.0
    b: float = 0.0
    breakpoints: np.ndarray | None = None  # isotonic: ascending scores
    fitted: np.ndarray | None = None       # isotonic: non-decreasing values


def platt_fit(scores, labels, max_iter: int = 200) -> CalibratorModel:
    """Fit p = 1 / (1 + exp(a*s + b)) by Newton iteration on the
    cross-entropy against Platt's smoothed targets."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if labels.min() == labels.max():
        raise DomainError("platt_fit needs both classes present")

    n_pos = float(np.sum(labels == 1))
    n_neg = float(np.sum(labels == 0))
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(labels == 1, hi, lo)

    # Newton with backtracking (Lin-Weng style), objective written in the
    # overflow-safe log1p form.
    a = 0.0
    b = math.log((n_neg + 1.0) / (n_pos + 1.0))

    def objective(a_, b_):
        z = a_ * scores + b_
        # -sum t*log p + (1-t)*log(1-p) with p = sigma(-z)
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)),
                                     (t - 1.0) * z + np.log1p(np.exp(z)))))

    value = objective(a, b)
    for iteration in range(max_iter):
        z = a * scores + b
        p = 1.0 / (1.0 + np.exp(z))
        d = t - p  # dF/dz per sample is (t - p)... sign handled below
        grad_a = float(np.dot(scores, d))
        grad_b = float(np.sum(d))
        w = p * (1.0 - p)
        h_aa = float(np.dot(scores * scores, w)) + 1e-12
        h_ab = float(np.dot(scores, w))
        h_bb = float(np.sum(w)) + 1e-12
        det = h_aa * h_bb - h_ab * h_ab
        if det <= 0:
            raise ConvergenceError("platt_fit: singular Hessian")
        da = -(h_bb * grad_a - h_ab * grad_b) / det
        db = -(h_aa * grad_b - h_ab * grad_a) / det
        if max(abs(grad_a), abs(grad_b)) < 1e-10:
            return CalibratorModel(kind="platt", a=a, b=b)
        step = 1.0
        while step >= 1e-10:
            candidate = objective(a + step * da, b + step * db)
            if candidate < value + 1e-12:
                a, b = a + step * da, b + step * db
                value = candidate
                break
            step *= 0.5
        else:
            raise ConvergenceError(
                f"platt_fit: line search failed at iteration {iteration} "
                f"(grad=({grad_a:.3e},{grad_b:.3e}))"
            )
    z = a * scores + b
    p = 1.0 / (1.0 + np.exp(z))
    grad_norm = max(abs(float(np.dot(scores, t - p))), abs(float(np.sum(t - p))))
    if grad_norm > 1e-6:
        raise ConvergenceError(
            f"platt_fit: no convergence after {max_iter} iterations "
            f"(grad norm {grad_norm:.3e}, objective {value:.6f})"
        )
    return CalibratorModel(kind="platt", a=a, b=b)


def pava(targets: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators: weighted least-squares fit that is
    non-decreasing in the given order."""
    n = targets.size
    fitted = np.empty(n)
    level_value: list[float] = []
    level_weight: list[float] = []
    level_size: list[int] = []
    for i in range(n):
        value, weight, size = float(targets[i]), float(weights[i]), 1
        while level_value and level_value[-1] >= value:
            prev_w = level_weight[-1]
            value = (value * weight + level_value[-1] * prev_w) / (weight + prev_w)
            weight += prev_w
            size += level_size[-1]
            level_value.pop(); level_weight.pop(); level_size.pop()
        level_value.append(value)
        level_weight.append(weight)
        level_size.append(size)
    pos = 0
    for value, size in zip(level_value, level_size):
        fitted[pos:pos + size] = value
        pos += size
    return fitted


def isotonic_fit(scores, targets) -> CalibratorModel:
    """Isotonic regression of targets on scores (PAVA), with tied scores
    pooled before fitting."""
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if scores.size < 2:
        raise DomainError("isotonic_fit needs at least 2 points")
    order = np.argsort(scores, kind="stable")
    s_sorted = scores[order]
    t_sorted = targets[order]

    unique_scores: list[float] = []
    pooled: list[float] = []
    weights: list[float] = []
    i = 0
    while i < s_sorted.size:
        j = i
        while j + 1 < s_sorted.size and s_sorted[j + 1] == s_sorted[i]:
            j += 1
        unique_scores.append(float(s_sorted[i]))
        pooled.append(float(np.mean(t_sorted[i:j + 1])))
        weights.append(float(j + 1 - i))
        i = j + 1

    fitted = pava(np.array(pooled), np.array(weights))
    return CalibratorModel(kind="isotonic",
                           breakpoints=np.array(unique_scores),
                           fitted=fitted)


def apply(calibrator: CalibratorModel, scores) -> np.ndarray:
    """Map raw scores through the calibrator.

    Platt is the fitted sigmoid; isotonic is stepwise-constant (value of
    the greatest breakpoint <= score) clamped at the ends.
    """
    scores = np.atleast_1d(np.asarray(scores, dtype=np.float64))
    if calibrator.kind == "platt":
        z = calibrator.a * scores + calibrator.b
        return 1.0 / (1.0 + np.exp(z))
    if calibrator.kind == "isotonic":
        idx = np.searchsorted(calibrator.breakpoints, scores, side="right") - 1
        idx = np.clip(idx, 0, calibrator.fitted.size - 1)
        return calibrator.fitted[idx]
    raise DomainError(f"unknown calibrator kind {calibrator.kind!r}")


def apply_scalar(calibrator: CalibratorModel, score: float) -> float:
    return float(apply(calibrator, np.array([score]))[0])
