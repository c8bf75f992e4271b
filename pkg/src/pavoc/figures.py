"""Matplotlib renderings for the report paths (sweep histograms, RTF bars)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_endpoint_histograms(counts_by_metric: dict, max_endpoint: int, path) -> None:
    """One bar chart per metric of how often each stage-1 endpoint was optimal."""
    metrics = list(counts_by_metric)
    fig, axes = plt.subplots(
        1, len(metrics), figsize=(3.2 * len(metrics), 3.0), squeeze=False
    )
    endpoints = list(range(max_endpoint + 1))
    for ax, metric in zip(axes[0], metrics):
        counts = counts_by_metric[metric]
        ax.bar(endpoints, [counts.get(n, 0) for n in endpoints], color="#4878a8")
        ax.set_title(metric, fontsize=9)
        ax.set_xlabel("stage-1 endpoint")
        ax.set_xticks(endpoints)
    axes[0][0].set_ylabel("files")
    fig.suptitle("Optimal stage-1 endpoint per file")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_rtf_bars(rtf_by_variant: dict, path) -> None:
    """Bar chart of real-time factors per sampler variant."""
    variants = list(rtf_by_variant)
    values = [rtf_by_variant[v] for v in variants]
    fig, ax = plt.subplots(figsize=(4.2, 3.0))
    ax.bar(variants, values, color="#4878a8")
    ax.set_ylabel("RTF (audio s / wall s)")
    ax.set_title("Inference speed vs real time")
    for i, value in enumerate(values):
        ax.text(i, value, f"{value:.2f}", ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
