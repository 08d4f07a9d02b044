"""Simulated stand-ins for UCR files that are not available locally.

``two_patterns`` follows the generating process of the archive's TwoPatterns
set (Gaussian background with an ordered pair of up/down steps). The
SonyAIBO stand-in only matches the shape of the real recordings (N, L, C);
it is a pipeline-level surrogate, not a model of the robot data.
Each generated series is z-normalized, as the archive files are.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .data import UCR_SUBSET, write_ucr_tsv

# class id -> (first pattern, second pattern); +1 = up step, -1 = down step
_TWO_PATTERN_CLASSES = {1: (-1, -1), 2: (1, -1), 3: (-1, 1), 4: (1, 1)}


def _znorm(x: np.ndarray) -> np.ndarray:
    std = x.std(axis=1, keepdims=True)
    std[std == 0] = 1.0
    return (x - x.mean(axis=1, keepdims=True)) / std


def two_patterns(n: int, rng: np.random.Generator, length: int = 128) -> tuple[np.ndarray, np.ndarray]:
    """Two non-overlapping steps at random ordered positions; the class is the (first, second) direction pair."""
    labels = rng.integers(1, 5, size=n)
    x = rng.normal(0.0, 1.0, size=(n, length))
    lo, hi = length // 8, length // 4
    for i, y in enumerate(labels):
        w1, w2 = (int(w) for w in rng.integers(lo, hi + 1, size=2))
        s1 = int(rng.integers(0, length - w1 - w2 + 1))
        s2 = int(rng.integers(s1 + w1, length - w2 + 1))
        for start, width, direction in zip((s1, s2), (w1, w2), _TWO_PATTERN_CLASSES[int(y)]):
            mid = start + width // 2
            x[i, start:mid] = -5.0 * direction
            x[i, mid : start + width] = 5.0 * direction
    return _znorm(x), labels


def sony_like(n: int, rng: np.random.Generator, length: int = 65) -> tuple[np.ndarray, np.ndarray]:
    labels = rng.integers(1, 3, size=n)
    t = np.linspace(0.0, 1.0, length)
    x = np.empty((n, length))
    for i, y in enumerate(labels):
        freq = (3.0 if y == 1 else 5.0) * rng.uniform(0.9, 1.1)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.8, 1.2)
        base = amp * np.sin(2 * np.pi * freq * t + phase)
        if y == 2:
            base = base * np.exp(-2.0 * t)
        x[i] = base + rng.normal(0.0, 0.3, size=length)
    return _znorm(x), labels


def _stratified_counts(n: int, n_classes: int) -> np.ndarray:
    counts = np.full(n_classes, n // n_classes)
    counts[: n % n_classes] += 1
    return counts


def _draw(generator, n: int, n_classes: int, rng: np.random.Generator, length: int):
    # rejection by class so every class is present even for tiny splits
    need = _stratified_counts(n, n_classes)
    xs, ys = [], []
    while need.sum() > 0:
        x, y = generator(4 * n, rng, length)
        for xi, yi in zip(x, y):
            if need[yi - 1] > 0:
                need[yi - 1] -= 1
                xs.append(xi)
                ys.append(yi)
    order = rng.permutation(len(ys))
    return np.asarray(xs)[order], np.asarray(ys)[order]


SURROGATES = {"TwoPatterns": two_patterns, "SonyAIBORobotSurface2": sony_like}


def write_surrogate(root: os.PathLike, name: str, seed: int = 0) -> Path:
    """Write a simulated ``name`` in UCR layout below ``root`` with archive-sized splits."""
    if name not in SURROGATES:
        raise KeyError(f"no surrogate generator for {name!r}; available: {sorted(SURROGATES)}")
    n_train, n_test, n_classes, length = UCR_SUBSET[name]
    rng = np.random.default_rng(seed)
    out = Path(root) / name
    for split, n in (("TRAIN", n_train), ("TEST", n_test)):
        x, y = _draw(SURROGATES[name], n, n_classes, rng, length)
        write_ucr_tsv(out / f"{name}_{split}.tsv", x, y)
    return out
