from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_samples(x: np.ndarray, path, title: str = "", reference: np.ndarray | None = None) -> Path:
    ncols = 2 if reference is not None else 1
    fig, axes = plt.subplots(1, ncols, figsize=(5 * ncols, 3), squeeze=False, sharey=True)
    panels = [(x, title or "generated")] + ([(reference, "ground truth")] if reference is not None else [])
    for ax, (data, name) in zip(axes[0], panels):
        for row in data:
            ax.plot(row, alpha=0.3, lw=0.8)
        ax.set_title(name)
    return _save(fig, path)


def plot_conditional(samples: dict[int, np.ndarray], path, title: str = "") -> Path:
    classes = sorted(samples)
    fig, axes = plt.subplots(1, len(classes), figsize=(3 * len(classes), 2.6), squeeze=False, sharey=True)
    for ax, c in zip(axes[0], classes):
        for row in samples[c]:
            ax.plot(row, alpha=0.3, lw=0.8)
        ax.set_title(f"class {c}")
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def plot_embedding(coords: np.ndarray, labels: np.ndarray, path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    sc = ax.scatter(coords[:, 0], coords[:, 1], c=labels, s=6, cmap="tab10")
    ax.legend(*sc.legend_elements(), fontsize=6, loc="best")
    ax.set_title(title)
    return _save(fig, path)


def plot_overlay(coords: np.ndarray, generated: np.ndarray, path, title: str = "") -> Path:
    """Scatter real (blue) against generated (orange) points."""
    fig, ax = plt.subplots(figsize=(4.5, 4))
    generated = np.asarray(generated, dtype=bool)
    ax.scatter(*coords[~generated].T, s=6, c="tab:blue", label="test", alpha=0.6)
    ax.scatter(*coords[generated].T, s=6, c="tab:orange", label="generated", alpha=0.6)
    ax.legend(fontsize=7)
    ax.set_title(title)
    return _save(fig, path)
