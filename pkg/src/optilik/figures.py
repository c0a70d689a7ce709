"""Figure rendering for the benchmark drivers.

Every function writes a PNG next to the delimited output. Matplotlib is
imported lazily with the Agg backend so headless runs work and library
users who never render pay no import cost.
"""

import numpy as np

__all__ = [
    "convergence_figure",
    "benchmark_figure",
    "estimation_figure",
]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def convergence_figure(traces, path):
    """Objective gap against iteration, one line per run.

    ``traces`` maps a mode name to a list of (label, objective_array)
    pairs; the gap is measured against each trace's own minimum.
    """
    plt = _pyplot()
    fig, axes = plt.subplots(1, len(traces), figsize=(6 * len(traces), 4.5), squeeze=False)
    for ax, (mode, runs) in zip(axes[0], sorted(traces.items())):
        for label, trace in runs:
            trace = np.asarray(trace, dtype=float)
            gap = trace - trace.min() + 1e-16
            ax.semilogy(np.arange(trace.shape[0]), gap, lw=0.8, label=label)
        ax.set_title(mode)
        ax.set_xlabel("iteration")
        ax.set_ylabel("objective gap")
        if runs and len(runs) <= 8:
            ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def benchmark_figure(rows, path):
    """Grouped bars of mean test CCR per dataset and method."""
    plt = _pyplot()
    means = {}
    for row in rows:
        if row.get("trial") == "mean":
            means.setdefault(row["dataset"], {})[row["method"]] = row["test_ccr"]
    datasets = sorted(means)
    methods = sorted({m for per in means.values() for m in per})
    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(datasets), 4.0))
    width = 0.8 / max(len(methods), 1)
    for j, method in enumerate(methods):
        xs = np.arange(len(datasets)) + j * width
        ys = [means[d].get(method, np.nan) for d in datasets]
        ax.bar(xs, ys, width=width, label=method)
    ax.set_xticks(np.arange(len(datasets)) + 0.4 - width / 2)
    ax.set_xticklabels(datasets)
    ax.set_ylabel("mean CCR")
    ax.set_ylim(0.5, 1.0)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def estimation_figure(rows, path):
    """Average mean-vector and covariance estimation error against N."""
    plt = _pyplot()
    ns = [row["sample_size"] for row in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for key, style in (
        ("fr_mean_error", "o-"),
        ("fr_cov_error", "s-"),
        ("kl_mean_error", "o--"),
        ("kl_cov_error", "s--"),
    ):
        ax.semilogy(ns, [row[key] for row in rows], style, label=key, ms=4)
    ax.set_xlabel("sample size N")
    ax.set_ylabel("average divergence to truth")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
