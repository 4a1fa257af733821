"""Matplotlib rendering for the CLI report path.

Library modules only export numbers; these helpers turn them into PNGs
written next to the delimited output. All figures go through the Agg
backend and carry no timestamp metadata, so reruns are byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import ScoreReport  # noqa: E402
from .stats import DensityGrid, VerbTable  # noqa: E402

_SAVEFIG_KW = {"dpi": 150, "metadata": {"Software": None}}


def render_density_grid(
    grid: DensityGrid, path: str | Path, title: str = "moment annotation density"
) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    # values[i, j] is (start_i, end_j); transpose so start runs along x.
    im = ax.imshow(
        grid.values.T,
        origin="lower",
        extent=(0.0, 1.0, 0.0, 1.0),
        cmap="viridis",
        aspect="equal",
    )
    ax.plot([0, 1], [0, 1], color="white", lw=0.6, ls="--", alpha=0.6)
    ax.set_xlabel("normalized start")
    ax.set_ylabel("normalized end")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="density")
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)


def render_duration_histogram(
    counts: np.ndarray,
    edges: np.ndarray,
    path: str | Path,
    title: str = "normalized moment durations",
) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    widths = np.diff(edges)
    ax.bar(edges[:-1], counts, width=widths, align="edge", color="#4878d0",
           edgecolor="white", linewidth=0.4)
    ax.set_xlabel("moment duration / video duration")
    ax.set_ylabel("pairs")
    ax.set_xlim(0.0, 1.0)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)


def render_verb_table(
    table: VerbTable, path: str | Path, title: str = "top action verbs"
) -> None:
    verbs = [v for v, _ in table.entries]
    counts = [c for _, c in table.entries]
    fig, ax = plt.subplots(figsize=(5.0, max(2.5, 0.22 * len(verbs) + 1.2)))
    y = np.arange(len(verbs))
    ax.barh(y, counts, color="#ee854a")
    ax.set_yticks(y)
    ax.set_yticklabels(verbs, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("occurrences")
    ax.set_title(f"{title} (coverage {100 * table.coverage:.1f}%)")
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)


def render_score_report(report: ScoreReport, path: str | Path) -> None:
    """Grouped bars, R vs discounted R, one panel per split."""
    splits = report.splits()
    combos = sorted({(n, m) for (_, n, m, _) in report.entries})
    fig, axes = plt.subplots(
        1, len(splits), figsize=(max(4.0, 2.8 * len(splits)), 3.4), squeeze=False
    )
    for ax, split in zip(axes[0], splits):
        x = np.arange(len(combos))
        r_vals = [report.value("R", n, m, split) for n, m in combos]
        dr_vals = [report.value("dR", n, m, split) for n, m in combos]
        ax.bar(x - 0.2, r_vals, width=0.4, label="R", color="#4878d0")
        ax.bar(x + 0.2, dr_vals, width=0.4, label="dR", color="#ee854a")
        ax.set_xticks(x)
        ax.set_xticklabels([f"n={n}\nm={m:g}" for n, m in combos], fontsize=7)
        ax.set_ylim(0, 100)
        ax.set_title(f"{split} (N={report.n_q[split]})", fontsize=9)
        ax.legend(fontsize=7)
    axes[0][0].set_ylabel("recall (%)")
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)
