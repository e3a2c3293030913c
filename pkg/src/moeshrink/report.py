"""Delimited outputs and the figures rendered alongside them.

Every reporting command writes its tables as CSV (the machine-readable
artifact) and drops a rendered PNG next to each plottable table.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def write_table_csv(path: str | Path, rows: list[dict], columns: list[str] | None = None) -> None:
    if not rows:
        raise ValueError("refusing to write an empty table")
    cols = columns or list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def plot_log_bf(rows: list[dict], ref_k: int, path: str | Path, title: str = "") -> None:
    """Average log Bayes factors against the reference component count, with
    a dashed zero line."""
    ks = [r["K"] for r in rows]
    means = [r["mean_log_bf"] for r in rows]
    sds = [r.get("sd_log_bf", 0.0) for r in rows]
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.axhline(0.0, ls="--", c="grey", lw=1)
    ax.errorbar(ks, means, yerr=sds, marker="o", capsize=3, lw=1.2)
    ax.set_xlabel("number of components K")
    ax.set_ylabel(f"avg. log BF vs K={ref_k}")
    ax.set_xticks(ks)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_log_ml(rows: list[dict], path: str | Path, title: str = "") -> None:
    ks = [r["K"] for r in rows]
    mls = [r["log_ml"] for r in rows]
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.plot(ks, mls, marker="o", lw=1.2)
    ax.set_xlabel("number of components K")
    ax.set_ylabel("log marginal likelihood")
    ax.set_xticks(ks)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_true_vs_estimated(pairs: dict[str, tuple[np.ndarray, np.ndarray]], path: str | Path) -> None:
    """Posterior means against the generating values, one panel per prior,
    with the dashed 45-degree line."""
    n = len(pairs)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.2), squeeze=False)
    for ax, (label, (truth, est)) in zip(axes[0], pairs.items()):
        lo = min(truth.min(), est.min()) - 0.3
        hi = max(truth.max(), est.max()) + 0.3
        ax.plot([lo, hi], [lo, hi], "--", c="grey", lw=1)
        ax.scatter(truth, est, s=14, alpha=0.7)
        ax.set_xlabel("true value")
        ax.set_ylabel("posterior mean")
        ax.set_title(label, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_relative_rmse(relative: list[dict], path: str | Path, title: str = "") -> None:
    """Grouped bars of the RMSE ratios relative to the normal-gamma prior."""
    metrics = ["rmse_zeros", "rmse_nonzeros", "rmse_overall", "rmse_pp"]
    labels = [r["prior"] for r in relative]
    x = np.arange(len(metrics))
    width = 0.8 / len(relative)
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    for i, row in enumerate(relative):
        vals = [row[m] for m in metrics]
        ax.bar(x + i * width, vals, width, label=labels[i])
    ax.axhline(1.0, ls="--", c="grey", lw=1)
    ax.set_xticks(x + width * (len(relative) - 1) / 2)
    ax.set_xticklabels(["zeros", "non-zeros", "overall", "pred. prob."])
    ax.set_ylabel("RMSE relative to NG")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_dataset_scatter(y: np.ndarray, labels: np.ndarray, path: str | Path, title: str = "") -> None:
    """Two-dimensional responses colored by true component."""
    fig, ax = plt.subplots(figsize=(4.0, 3.6))
    for k in np.unique(labels):
        pts = y[labels == k]
        ax.scatter(pts[:, 0], pts[:, 1], s=12, alpha=0.75, label=f"group {k}")
    ax.set_xlabel("y1")
    ax.set_ylabel("y2")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_occurrence_probs(gamma_mean: np.ndarray, names: list[str], path: str | Path) -> None:
    """Posterior mean occurrence probabilities per component (Bernoulli fits)."""
    k, j = gamma_mean.shape
    x = np.arange(j)
    width = 0.8 / k
    fig, ax = plt.subplots(figsize=(max(5.0, 0.6 * j + 2), 3.4))
    for c in range(k):
        ax.bar(x + c * width, gamma_mean[c], width, label=f"group {c + 1}")
    ax.set_xticks(x + width * (k - 1) / 2)
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("occurrence probability")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
