"""Figure rendering for the CLI report path.

Each command with an ``--fig`` option renders one PNG next to its delimited
report: the depth command plots the per-sample margins at the witnessing
direction, the rank command a bar chart of normalized depths, and the
deepest command the best-depth trace over the candidate stream.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_depth_margins(margins, count: float, n: int, path: str) -> None:
    """Histogram of the per-sample arguments at the optimal direction and slack."""
    margins = np.asarray(margins, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.hist(margins, bins=min(30, max(8, n // 2)), color="#4878d0", edgecolor="white")
    ax.axvline(0.0, color="#d65f5f", linewidth=1.2)
    ax.set_xlabel("per-sample margin at the witnessing direction")
    ax.set_ylabel("samples")
    ax.set_title(f"depth {count}/{n}: margins >= 0 are counted")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_rank_chart(labels, normalized, path: str) -> None:
    """Horizontal bar chart of candidates sorted by normalized depth."""
    normalized = np.asarray(normalized, dtype=float)
    pos = np.arange(len(labels))[::-1]
    fig, ax = plt.subplots(figsize=(6.0, 1.0 + 0.45 * len(labels)))
    ax.barh(pos, normalized, color="#4878d0")
    ax.set_yticks(pos)
    ax.set_yticklabels(labels, fontsize=8)
    ax.set_xlabel("normalized depth")
    ax.set_xlim(0.0, max(1e-12, float(normalized.max())) * 1.15)
    ax.set_title("candidate ranking by depth")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_deepest_trace(trace, path: str) -> None:
    """Best-so-far normalized depth over the candidate stream."""
    trace = np.asarray(trace, dtype=float)
    best = np.maximum.accumulate(trace)
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(trace, ".", color="#b0b0b0", markersize=3, label="candidate depth")
    ax.plot(best, "-", color="#4878d0", linewidth=1.5, label="best so far")
    ax.set_xlabel("candidate index")
    ax.set_ylabel("normalized depth")
    ax.legend(frameon=False, fontsize=8)
    ax.set_title("deepest-estimate search")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
