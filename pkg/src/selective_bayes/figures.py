"""Figure rendering for the CLI report path.

Uses the Agg backend so rendering works headless; PNG metadata is stripped
so repeated runs with the same seed produce byte-identical files.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 150, "metadata": {"Software": None}}


def render_univariate_figure(table, path):
    """Two panels: log selection probability curves and estimator curves."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.5))
    ax1.plot(table.mu_values, table.exact_log_probability, "k-", label="exact")
    ax1.plot(table.mu_values, table.chernoff_log_probability, "--",
             label="chernoff")
    ax1.plot(table.mu_values, table.barrier_log_probability, "-.",
             label="barrier")
    ax1.set_xlabel("mean")
    ax1.set_ylabel("log selection probability")
    ax1.legend()
    ax2.plot(table.y_values, table.unadjusted, "k:", label="unadjusted")
    ax2.plot(table.y_values, table.exact_mle, "k-", label="exact")
    ax2.plot(table.y_values, table.approximate_mle, "--", label="approximate")
    ax2.plot(table.y_values, table.randomized_mle, "-.", label="randomized")
    ax2.set_xlabel("observed y")
    ax2.set_ylabel("estimate")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_fcr_figure(report, path, level=None):
    """Bar chart of observed per-method coverage."""
    methods = list(report.coverage)
    values = [report.coverage[m] for m in methods]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(range(len(methods)), values, color="0.6")
    ax.set_xticks(range(len(methods)))
    ax.set_xticklabels(methods, rotation=20)
    ax.set_ylabel("coverage")
    ax.set_ylim(0, 1)
    if level is not None:
        ax.axhline(level, color="k", linestyle="--", linewidth=1)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_consistency_figure(report, path):
    """Median error versus n, one line per arm, log-scaled axes."""
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for arm, marker in (("randomized", "o"), ("nonrandomized", "s"),
                        ("unadjusted", "^")):
        ax.plot(report.n_values, report.median_errors[arm], marker=marker,
                label=arm)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("median absolute error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_interval_figure(names, lower, upper, point, path):
    """Horizontal interval (forest) plot for the selected coefficients."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    point = np.asarray(point, dtype=float)
    ypos = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(6.5, 1.0 + 0.4 * len(names)))
    ax.hlines(ypos, lower, upper, color="0.3")
    ax.plot(point, ypos, "k|", markersize=10)
    ax.axvline(0.0, color="0.8", linewidth=1)
    ax.set_yticks(ypos)
    ax.set_yticklabels(names)
    ax.set_xlabel("coefficient")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_estimate_figure(names, estimates, path):
    """Bar chart of point estimates, one group label per coordinate."""
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    keys = list(estimates)
    width = 0.8 / max(len(keys), 1)
    xpos = np.arange(len(names))
    for i, k in enumerate(keys):
        ax.bar(xpos + i * width, estimates[k], width, label=k)
    ax.set_xticks(xpos + 0.4 - width / 2)
    ax.set_xticklabels(names, rotation=20)
    ax.set_ylabel("estimate")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
