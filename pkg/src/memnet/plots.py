"""Figure rendering for the report paths.

Every CLI command that writes delimited output can drop a matching PNG
next to it; these helpers hold the figure code. Rendering uses the Agg
backend so the package works headless.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_panel_figure(panel, path, title=None):
    """Stacked per-node traces of a series panel."""
    values, labels = panel.values, panel.labels
    n = values.shape[1]
    fig, axes = plt.subplots(n, 1, sharex=True, figsize=(8, 1.4 * n + 1))
    axes = np.atleast_1d(axes)
    for i, ax in enumerate(axes):
        ax.plot(values[:, i], lw=0.6, color="royalblue")
        ax.set_ylabel(labels[i], rotation=0, ha="right", va="center")
    axes[-1].set_xlabel("time")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_acv_figure(acv, path, title=None):
    """Lag decay of the diagonal autocovariances plus lag-0 heat map."""
    h = np.arange(acv.max_lag + 1)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for i in range(acv.dim):
        ax1.plot(h, acv.gammas[:, i, i], lw=1.0, label=f"node {i + 1}")
    ax1.set_xlabel("lag")
    ax1.set_ylabel("autocovariance")
    ax1.legend(fontsize=8)
    im = ax2.imshow(acv.gammas[0], cmap="RdBu_r")
    ax2.set_title("lag-0 matrix")
    fig.colorbar(im, ax=ax2, shrink=0.8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_forecast_figure(history, predictions, path, labels=None, actuals=None):
    """Recent history with the forecast fan appended per node."""
    t, n = history.shape
    h = predictions.shape[0]
    tail = min(t, 100)
    fig, axes = plt.subplots(n, 1, sharex=True, figsize=(8, 1.4 * n + 1))
    axes = np.atleast_1d(axes)
    xs_h = np.arange(t - tail, t)
    xs_f = np.arange(t, t + h)
    for i, ax in enumerate(axes):
        ax.plot(xs_h, history[-tail:, i], lw=0.7, color="grey")
        ax.plot(xs_f, predictions[:, i], lw=1.2, color="crimson", marker="o", ms=2.5)
        if actuals is not None:
            ax.plot(xs_f, actuals[:, i], lw=0.8, color="black", ls="--")
        if labels is not None:
            ax.set_ylabel(labels[i], rotation=0, ha="right", va="center")
        ax.axvline(t - 0.5, color="k", lw=0.5, ls=":")
    axes[-1].set_xlabel("time")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_selection_figure(report, path):
    """Criterion values per candidate, winner highlighted."""
    rows = [r for r in report.rows if r.fit is not None]
    names = [r.spec.describe() for r in rows]
    bics = [r.bic for r in rows]
    colors = ["seagreen" if r.converged else "lightgray" for r in rows]
    try:
        best = report.winner
        colors[rows.index(best)] = "darkorange"
    except Exception:
        pass
    fig, ax = plt.subplots(figsize=(max(6, 0.7 * len(rows)), 4))
    ax.bar(range(len(rows)), bics, color=colors)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("BIC")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_graph_figure(graph, path, title=None):
    """Node-link drawing; coordinates are used when present, else a
    circular layout."""
    n = graph.num_nodes
    if graph.coords is not None:
        pos = np.asarray(graph.coords, dtype=float)
    else:
        ang = 2 * np.pi * np.arange(n) / n
        pos = np.column_stack([np.cos(ang), np.sin(ang)])
    fig, ax = plt.subplots(figsize=(5, 5))
    for i, j in sorted(graph.edges):
        ax.plot(*zip(pos[i - 1], pos[j - 1]), color="steelblue", lw=1.2, zorder=1)
    ax.scatter(pos[:, 0], pos[:, 1], s=260, color="white", edgecolor="k", zorder=2)
    for i, lab in enumerate(graph.labels):
        ax.annotate(lab, pos[i], ha="center", va="center", fontsize=9, zorder=3)
    ax.set_aspect("equal")
    ax.axis("off")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_table_figure(frame, path, title=None, highlight_col=None):
    """Grouped bars of computed vs reference values from a reproduction
    table (rows with both present)."""
    import pandas as pd

    sub = frame.dropna(subset=["computed"]) if "computed" in frame else frame
    fig, ax = plt.subplots(figsize=(max(6, 0.9 * len(sub)), 4))
    idx = np.arange(len(sub))
    width = 0.38
    ax.bar(idx - width / 2, sub["computed"], width, label="computed",
           color="royalblue")
    if "reference" in sub and sub["reference"].notna().any():
        ax.bar(idx + width / 2, sub["reference"], width, label="reference",
               color="lightsteelblue")
    labels = sub[highlight_col] if highlight_col else sub.index.astype(str)
    ax.set_xticks(idx)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
