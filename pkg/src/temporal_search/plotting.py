"""Figures for run reports, written straight to image files."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .analysis import CurvePoint  # noqa: E402


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_threshold_curves(curves: Mapping[str, Sequence[CurvePoint]], path: str | Path) -> Path:
    """Accuracy of predictions above each confidence threshold, one line per label."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, points in curves.items():
        pts = [p for p in points if p.accuracy is not None]
        ax.plot([p.threshold for p in pts], [100 * p.accuracy for p in pts], marker="o", ms=3, label=label)
    ax.set_xlabel("confidence threshold")
    ax.set_ylabel("accuracy (%)")
    ax.set_xlim(0, 1)
    ax.grid(alpha=0.3)
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_scaling(series: Mapping[str, Sequence[tuple[float, float]]], path: str | Path) -> Path:
    """Accuracy against the mean number of inference calls actually spent."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, points in series.items():
        pts = sorted(points)
        ax.plot([x for x, _ in pts], [100 * y for _, y in pts], marker="o", label=label)
    ax.set_xlabel("inference calls per question")
    ax.set_ylabel("accuracy (%)")
    ax.grid(alpha=0.3)
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_group_accuracy(by_group: Mapping[str, float], path: str | Path, title: str = "") -> Path:
    groups = [g for g in ("short", "medium", "long") if g in by_group] + sorted(
        g for g in by_group if g not in ("short", "medium", "long")
    )
    fig, ax = plt.subplots(figsize=(4, 3))
    values = [100 * (by_group[g] or 0.0) for g in groups]
    ax.bar(groups, values, color="#4c72b0")
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 100)
    if title:
        ax.set_title(title)
    return _save(fig, path)
