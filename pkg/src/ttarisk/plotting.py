"""Figure rendering for histogram reports.

Renders occupancy bar charts next to the delimited output so a report
directory is self-contained.  Uses the Agg backend; nothing here opens a
window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .risk_metrics import StateHistogram


def render_histogram_png(hist: StateHistogram, out_path, title: str, log_scale: bool = True):
    """Bar chart of raw state occupancy counts."""
    states = list(range(len(hist.counts)))
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.bar(states, hist.counts, color="#336699", edgecolor="black", linewidth=0.4)
    if log_scale and any(c > 0 for c in hist.counts):
        ax.set_yscale("symlog")
    ax.set_xticks(states)
    ax.set_xlabel("risk state")
    ax.set_ylabel("frames")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return Path(out_path)


def render_frequency_comparison_png(hists: dict[str, StateHistogram], out_path):
    """Side-by-side normalized frequency bars for several histograms."""
    if not hists:
        raise ValueError("no histograms to plot")
    n_states = max(len(h.counts) for h in hists.values())
    labels = sorted(hists)
    width = 0.8 / len(labels)
    fig, ax = plt.subplots(figsize=(7.5, 4.0))
    for j, label in enumerate(labels):
        h = hists[label]
        total = max(h.total, 1)
        freqs = [c / total for c in h.counts] + [0.0] * (n_states - len(h.counts))
        xs = [i + (j - (len(labels) - 1) / 2) * width for i in range(n_states)]
        ax.bar(xs, freqs, width=width, label=label)
    ax.set_yscale("log")
    ax.set_xticks(range(n_states))
    ax.set_xlabel("risk state")
    ax.set_ylabel("frequency")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return Path(out_path)
