"""Figures for evaluation reports.

Rendering goes through the Agg backend with PNG metadata stripped, so the
same curve always produces the same bytes.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.4,
    "svg.hashsalt": "taskrec",
}

Curve = Sequence[tuple[int, float, float]]


def figure_size(width: float = 4.5):
    golden = (math.sqrt(5) - 1.0) / 2.0
    return (width, width * golden)


def _save(fig, path) -> None:
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)


def plot_pr_curves(curves: Mapping[str, Curve], path, title: str | None = "PR curve") -> None:
    """Precision against recall, one line per labelled curve."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figure_size())
        for label, points in curves.items():
            recall = [r for _, _, r in points]
            precision = [p for _, p, _ in points]
            ax.plot(recall, precision, label=label)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_xlim(0, 1)
        ax.set_ylim(bottom=0)
        if title:
            ax.set_title(title)
        if len(curves) > 1 or any(curves):
            ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def plot_mpr_bars(values: Mapping[str, float], path, reference: float | None = 50.0) -> None:
    """Bar chart of MPR per model; the dashed line marks random ranking."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figure_size())
        labels = list(values)
        ax.bar(range(len(labels)), [values[k] for k in labels], color="0.45")
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels)
        ax.set_ylabel("MPR (lower is better)")
        if reference is not None:
            ax.axhline(reference, color="0.2", linestyle="--", linewidth=0.8)
        fig.tight_layout()
        _save(fig, path)
