"""Figure rendering for pipeline and sweep reports.

All figures go to files next to the delimited outputs; nothing opens a
display. Candidate maps are only drawn when a two-dimensional view exists
(planar regressors, or stored mixture coordinates projected to the first
two components).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def candidate_view(cands) -> np.ndarray | None:
    """Two-dimensional coordinates for plotting, if the instance has any."""
    if cands.points is not None and cands.points.shape[1] >= 2:
        return cands.points[:, :2]
    if cands.m == 2:
        return cands.toarray()
    return None


def save_candidate_map(path, xy, prune_report, design=None) -> None:
    """Scatter of removed and surviving candidates, plus the final design."""
    n_points = xy.shape[0]
    kept_aug = np.zeros(n_points, dtype=bool)
    kept_aug[prune_report.survivors_aug] = True
    kept_exch = np.zeros(n_points, dtype=bool)
    kept_exch[prune_report.survivors_exch] = True

    fig, ax = plt.subplots(figsize=(6.0, 5.6))
    removed = ~kept_aug
    ax.scatter(xy[removed, 0], xy[removed, 1], s=6, c="0.82", label=f"removed, variance bound ({int(removed.sum())})")
    second = kept_aug & ~kept_exch
    ax.scatter(xy[second, 0], xy[second, 1], s=10, c="#7fb3d5", label=f"removed, exchange bound ({int(second.sum())})")
    ax.scatter(xy[kept_exch, 0], xy[kept_exch, 1], s=14, c="#1a5276", label=f"survivors ({int(kept_exch.sum())})")
    if design is not None:
        pts = xy[design.indices]
        sizes = 40.0 * (design.counts if design.counts is not None else design.weights * design.indices.size)
        ax.scatter(pts[:, 0], pts[:, 1], s=np.maximum(sizes, 25.0), c="#c0392b", marker="+", linewidths=1.6,
                   label="final design")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(f"candidate reduction, n={prune_report.n}, eff={prune_report.eff_plus:.4f}")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=DPI)
    plt.close(fig)


def save_reduction_bars(path, n_total, n1, n2) -> None:
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    counts = [n_total, n1, n2]
    labels = ["initial", "after variance bound", "after exchange bound"]
    ax.bar(labels, counts, color=["0.7", "#7fb3d5", "#1a5276"])
    ax.set_yscale("log")
    ax.set_ylabel("candidates")
    for pos, value in enumerate(counts):
        ax.text(pos, value, str(value), ha="center", va="bottom", fontsize=9)
    ax.tick_params(axis="x", labelsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=DPI)
    plt.close(fig)


def save_sweep_figure(path, rows: list[dict], x_key: str) -> None:
    """Reduction counts and phase times across a parameter sweep."""
    x = [row[x_key] for row in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.6, 4.0))
    ax1.plot(x, [row["N1"] for row in rows], "o-", c="#7fb3d5", label="after variance bound")
    ax1.plot(x, [row["N2"] for row in rows], "o-", c="#1a5276", label="after exchange bound")
    ax1.set_yscale("log")
    ax1.set_xlabel(x_key)
    ax1.set_ylabel("candidates")
    ax1.legend(fontsize=8)
    for key, color in [("t1", "0.6"), ("t2", "#8e44ad"), ("t3", "#7fb3d5"), ("t4", "#1a5276"), ("t5", "#c0392b")]:
        ax2.plot(x, [row[key] for row in rows], "o-", c=color, label=key)
    ax2.set_yscale("log")
    ax2.set_xlabel(x_key)
    ax2.set_ylabel("seconds")
    ax2.legend(fontsize=8, ncols=2)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=DPI)
    plt.close(fig)
