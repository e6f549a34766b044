"""Deterministic matplotlib figures saved next to the delimited reports.

Every helper renders to a file with a fixed size, dpi, and style so repeated
runs produce byte-identical images.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .embeddings import ProjectedPoints

_FIGSIZE = (6.0, 4.0)
_DPI = 120


def _finish(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_distance_histogram(
    distances_by_type: dict[str, np.ndarray],
    radii: dict[str, float],
    path: str,
    xlabel: str = "distance to center",
    title: str = "Distances and fitted radii",
) -> None:
    """Overlaid per-type histograms with a vertical line at each fitted radius."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for i, (ne_type, distances) in enumerate(distances_by_type.items()):
        color = f"C{i}"
        ax.hist(
            distances, bins=40, alpha=0.45, label=ne_type, color=color
        )
        radius = radii.get(ne_type)
        if radius is not None:
            ax.axvline(radius, color=color, linestyle="--", linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.legend()
    _finish(fig, path)


def save_scatter(points: ProjectedPoints, path: str, title: str = "Projection") -> None:
    """2-D or 3-D scatter of projected points, colored by label."""
    labels: list[str] = []
    for _, label, _ in points.rows:
        if label not in labels:
            labels.append(label)
    three_d = points.out_dim == 3
    fig = plt.figure(figsize=_FIGSIZE)
    ax = fig.add_subplot(projection="3d" if three_d else None)
    for i, label in enumerate(labels):
        coords = np.array([c for _, lab, c in points.rows if lab == label])
        if three_d:
            ax.scatter(coords[:, 0], coords[:, 1], coords[:, 2], s=8, label=label)
        else:
            ax.scatter(coords[:, 0], coords[:, 1], s=8, label=label)
    ax.set_title(title)
    ax.legend()
    _finish(fig, path)


def save_training_curve(
    xs: list[float],
    ys: list[float],
    path: str,
    xlabel: str,
    ylabel: str,
    title: str,
) -> None:
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(xs, ys, linewidth=1.4)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    _finish(fig, path)


def save_score_bars(
    group_labels: list[str],
    series: dict[str, list[float]],
    path: str,
    ylabel: str,
    title: str,
) -> None:
    """Grouped bar chart, e.g. baseline-vs-enhanced F1 per type."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    positions = np.arange(len(group_labels), dtype=float)
    width = 0.8 / max(1, len(series))
    for i, (name, values) in enumerate(series.items()):
        ax.bar(positions + i * width, values, width=width, label=name)
    ax.set_xticks(positions + width * (len(series) - 1) / 2)
    ax.set_xticklabels(group_labels)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    ax.grid(axis="y", alpha=0.3)
    _finish(fig, path)


def save_residual_histogram(residuals: np.ndarray, path: str, title: str) -> None:
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.hist(residuals, bins=40, color="C0", alpha=0.8)
    ax.set_xlabel("residual")
    ax.set_ylabel("count")
    ax.set_title(title)
    _finish(fig, path)
