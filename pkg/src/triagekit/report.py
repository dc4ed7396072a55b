"""Render the report figures from the emitted CSV data.

Figures are a convenience layer over the delimited outputs: every number
shown here is read back from the CSVs the evaluate/explain commands wrote,
so the plots can be reproduced from the data files alone.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path: Path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def _plot_roc(out: Path) -> Path:
    rows = _read_csv(out / "roc.csv")
    fpr = [float(r["fpr"]) for r in rows]
    tpr = [float(r["tpr"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4.5))
    ax.plot(fpr, tpr, lw=1.8, label="classifier")
    ax.plot([0, 1], [0, 1], ls="--", lw=1, color="grey", label="coin")
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_title("ROC curve, special care")
    ax.legend(loc="lower right", frameon=False)
    return _save(fig, out / "figures" / "roc.png")


def _plot_pr(out: Path) -> Path:
    rows = _read_csv(out / "pr.csv")
    recall = [float(r["recall"]) for r in rows]
    precision = [float(r["precision"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4.5))
    ax.plot(recall, precision, lw=1.8)
    ax.set_xlabel("Recall")
    ax.set_ylabel("Precision")
    ax.set_ylim(0, 1.02)
    ax.set_title("Precision-recall curve, special care")
    return _save(fig, out / "figures" / "pr.png")


def _plot_calibration(out: Path) -> Path:
    rows = _read_csv(out / "calibration.csv")
    mean_pred = [float(r["bin_center"]) for r in rows]
    observed = [float(r["observed"]) for r in rows]
    counts = [int(r["count"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4.5))
    ax.plot([0, 1], [0, 1], ls="--", lw=1, color="grey", label="perfect")
    sizes = [20 + 180 * c / max(counts) for c in counts]
    ax.scatter(mean_pred, observed, s=sizes, alpha=0.8, label="bins")
    ax.set_xlabel("Mean predicted probability")
    ax.set_ylabel("Observed positive rate")
    ax.set_title("Calibration, special care")
    ax.legend(loc="upper left", frameon=False)
    return _save(fig, out / "figures" / "calibration.png")


def _plot_scatter(out: Path) -> Path:
    rows = _read_csv(out / "scatter.csv")
    pred = [float(r["predicted"]) for r in rows]
    true = [float(r["true"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4.5))
    lim = max(max(true, default=1.0), max(pred, default=1.0)) * 1.05
    ax.plot([0, lim], [0, lim], ls="--", lw=1, color="grey")
    ax.scatter(true, pred, s=12, alpha=0.45)
    ax.set_xlabel("True days under special care")
    ax.set_ylabel("Predicted days")
    ax.set_title("Days target, held-out predictions")
    return _save(fig, out / "figures" / "scatter.png")


def _plot_importance(out: Path, top: int = 20) -> Path:
    rows = _read_csv(out / "importance.csv")[:top]
    names = [r["feature"] for r in rows][::-1]
    values = [float(r["mean_abs_attribution"]) for r in rows][::-1]
    fig, ax = plt.subplots(figsize=(6, 0.3 * len(names) + 1.2))
    ax.barh(range(len(names)), values, color="#4878a8")
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=8)
    ax.set_xlabel("mean |attribution| (margin units)")
    ax.set_title("Feature importance (associational, not causal)")
    return _save(fig, out / "figures" / "importance.png")


def render_figures(out: Path, tasks: list[str]) -> list[Path]:
    (out / "figures").mkdir(exist_ok=True)
    written = []
    if "special_care" in tasks:
        written.append(_plot_roc(out))
        written.append(_plot_pr(out))
        if (out / "calibration.csv").exists():
            written.append(_plot_calibration(out))
    if "days" in tasks:
        written.append(_plot_scatter(out))
    if (out / "importance.csv").exists():
        written.append(_plot_importance(out))
    return written
