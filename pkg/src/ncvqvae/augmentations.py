"""Augmented views for the self-supervised branch.

Every function takes a 1-D series and an explicit ``numpy.random.Generator``;
keyword overrides pin the random draws so tests can trace them by hand.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np

KINDS = ("warp_resize", "slice_shuffle", "gaussian")


@dataclass
class AugmentationSpec:
    kind: str = "warp_resize"
    warp_factor_range: tuple[float, float] = (0.9, 2.0)
    window_fraction_range: tuple[float, float] = (0.1, 0.9)
    amplitude_sigma: float = 0.2
    n_slices: int = 4
    noise_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown augmentation {self.kind!r}; expected one of {KINDS}")
        self.warp_factor_range = tuple(float(v) for v in self.warp_factor_range)
        self.window_fraction_range = tuple(float(v) for v in self.window_fraction_range)
        lo, hi = self.warp_factor_range
        if not 0 < lo <= hi:
            raise ValueError(f"invalid warp_factor_range {self.warp_factor_range}")
        if self.n_slices < 2:
            raise ValueError("n_slices must be at least 2")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["warp_factor_range"] = list(self.warp_factor_range)
        d["window_fraction_range"] = list(self.window_fraction_range)
        return d


def _resample(x: np.ndarray, n: int) -> np.ndarray:
    if n == len(x):
        return x.copy()
    if len(x) == 1:
        return np.full(n, x[0])
    return np.interp(np.linspace(0, len(x) - 1, n), np.arange(len(x)), x)


def window_warp_amplitude(
    x: np.ndarray,
    spec: AugmentationSpec,
    rng: np.random.Generator,
    *,
    factor: Optional[float] = None,
    window: Optional[tuple[int, int]] = None,
    eps: Optional[float] = None,
) -> np.ndarray:
    """Time-scale a random window by a random factor, then rescale the amplitude by ``1 + eps``."""
    x = np.asarray(x, dtype=np.float64)
    L = len(x)
    if L < 4:
        raise ValueError(f"window warp needs length >= 4, got {L}")
    if window is None:
        lo, hi = spec.window_fraction_range
        width = 0
        while width < 1:
            width = int(round(rng.uniform(lo, hi) * L))
        width = min(width, L)
        start = int(rng.integers(0, L - width + 1))
        window = (start, start + width)
    if factor is None:
        factor = rng.uniform(*spec.warp_factor_range)
    if eps is None:
        eps = rng.normal(0.0, spec.amplitude_sigma)

    start, stop = window
    seg = x[start:stop]
    warped_len = max(1, int(round(len(seg) * factor)))
    if warped_len == len(seg):
        out = x.copy()
    else:
        stretched = np.concatenate([x[:start], _resample(seg, warped_len), x[stop:]])
        out = _resample(stretched, L)
    return out * (1.0 + eps)


def slice_and_shuffle(
    x: np.ndarray,
    spec: AugmentationSpec,
    rng: np.random.Generator,
    *,
    cuts: Optional[Sequence[int]] = None,
    permutation: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Cut into ``n_slices`` contiguous pieces at distinct interior points and permute them."""
    x = np.asarray(x)
    L = len(x)
    k = spec.n_slices
    if L < k:
        raise ValueError(f"series of length {L} cannot be cut into {k} slices")
    if cuts is None:
        cuts = rng.choice(np.arange(1, L), size=k - 1, replace=False)
    cuts = np.sort(np.asarray(cuts, dtype=int))
    pieces = np.split(x, cuts)
    if permutation is None:
        permutation = rng.permutation(len(pieces))
    return np.concatenate([pieces[i] for i in permutation])


def gaussian_noise(x: np.ndarray, spec: AugmentationSpec, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if spec.noise_sigma == 0:
        return x.copy()
    return x + rng.normal(0.0, spec.noise_sigma, size=x.shape)


_DISPATCH = {
    "warp_resize": window_warp_amplitude,
    "slice_shuffle": slice_and_shuffle,
    "gaussian": gaussian_noise,
}


def augment(x: np.ndarray, spec: AugmentationSpec, rng: np.random.Generator) -> np.ndarray:
    return _DISPATCH[spec.kind](x, spec, rng)


def augment_batch(batch: np.ndarray, spec: AugmentationSpec, rng: np.random.Generator) -> np.ndarray:
    """Apply ``spec`` to each row of an ``(N, L)`` array independently."""
    return np.stack([augment(row, spec, rng) for row in np.asarray(batch)])
