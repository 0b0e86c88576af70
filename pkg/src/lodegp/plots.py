"""Matplotlib figure rendering for the CLI report paths.

Figures are written straight to files (Agg backend); every plot has a CSV
counterpart emitted next to it, so the figures are a convenience view.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_posterior(path, query_times, mean, var=None, data=None, ref=None, channels=(), title=None):
    """Stacked per-channel panels: posterior mean, 2-sigma band, training
    points, and the reference solution when available."""
    query_times = np.asarray(query_times)
    mean = np.asarray(mean)
    n = mean.shape[1]
    fig, axes = plt.subplots(n, 1, sharex=True, figsize=(8, 2.2 * n), squeeze=False)
    for c in range(n):
        ax = axes[c][0]
        if var is not None:
            sd = np.sqrt(np.maximum(np.asarray(var)[:, c], 0.0))
            ax.fill_between(query_times, mean[:, c] - 2 * sd, mean[:, c] + 2 * sd,
                            alpha=0.25, color="tab:blue", linewidth=0)
        if ref is not None:
            ax.plot(query_times, np.asarray(ref)[:, c], color="tab:red", lw=1.2, label="reference")
        ax.plot(query_times, mean[:, c], "--", color="tab:blue", lw=1.4, label="posterior mean")
        if data is not None:
            ax.plot(data.times, data.values[:, c], "k*", ms=6, label="data")
        ax.set_ylabel(channels[c] if c < len(channels) else f"ch{c}")
        if c == 0:
            ax.legend(loc="best", fontsize=8)
            if title:
                ax.set_title(title)
    axes[-1][0].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_samples(path, times, draws, channels=(), title=None):
    times = np.asarray(times)
    n = draws[0].shape[1]
    fig, axes = plt.subplots(n, 1, sharex=True, figsize=(8, 2.2 * n), squeeze=False)
    for c in range(n):
        ax = axes[c][0]
        for k, d in enumerate(draws):
            ax.plot(times, d[:, c], lw=1.0, alpha=0.8)
        ax.set_ylabel(channels[c] if c < len(channels) else f"ch{c}")
    if title:
        axes[0][0].set_title(title)
    axes[-1][0].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_ode_error_box(path, errors_by_label, reference_line=None, title=None):
    """Horizontal boxplots of per-run ODE errors on a log axis, one box per
    (model, equation) pair, on a log axis so the model separation is visible."""
    labels = []
    series = []
    for label, per_eq in errors_by_label.items():
        for e, values in enumerate(per_eq):
            labels.append(f"{label} ODE{e + 1}")
            series.append(values)
    fig, ax = plt.subplots(figsize=(9, 0.6 * len(labels) + 1.2))
    ax.boxplot(series, orientation="horizontal", tick_labels=labels)
    ax.set_xscale("log")
    ax.set_xlabel("ODE error")
    if reference_line is not None:
        ax.axvline(reference_line, color="forestgreen", ls="--", lw=1.2,
                   label="symbolic solution")
        ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_loss_traces(path, traces_by_label, title=None):
    fig, ax = plt.subplots(figsize=(8, 4))
    colors = {"lodegp": "tab:blue", "baseline_se": "tab:orange"}
    for label, traces in traces_by_label.items():
        for i, tr in enumerate(traces):
            ax.plot(tr, color=colors.get(label), alpha=0.6,
                    label=label if i == 0 else None)
    ax.set_xlabel("iteration")
    ax.set_ylabel("negative MLL per time point")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
