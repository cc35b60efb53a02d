"""Figure rendering for the bench/ablate/sweep report paths.

All figures go to files (Agg backend); the delimited CSV output written by
the bench module stays the machine-readable source of truth.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def scaling_figure(records_by_component, path):
    """Log-log forward time vs sequence length, one line per component."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for component, records in records_by_component.items():
        ns = [r.n for r in records]
        ts = [r.median_time * 1e3 for r in records]
        ax.plot(ns, ts, marker="o", label=component)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("sequence length N")
    ax.set_ylabel("median forward time [ms]")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def ablation_figure(results, path, metric_key=None):
    """Bar chart of one ranking metric across the ablation variants."""
    if metric_key is None:
        metric_key = next(k for k in results[0].metrics if k.startswith("ndcg"))
    names = [r.variant for r in results]
    values = [r.metrics[metric_key] for r in results]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(range(len(names)), values, color="steelblue")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel(metric_key)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def sweep_figure(rows, path):
    """Metrics against the swept hyperparameter value."""
    axis = rows[0]["axis"]
    values = [r["value"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for key in rows[0]:
        if key.startswith(("recall@", "mrr@", "ndcg@")):
            ax.plot(values, [r[key] for r in rows], marker="o", label=key)
    ax.set_xlabel(axis)
    ax.set_ylabel("metric value")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
