"""UCR archive ingest: parsing, normalization and train/validation splitting."""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
from sklearn.model_selection import train_test_split

DATA_ROOT_ENV = "NCVQVAE_DATA_ROOT"

# name -> (n_train, n_test, n_classes, length)
UCR_SUBSET: dict[str, tuple[int, int, int, int]] = {
    "ElectricDevices": (8926, 7711, 7, 96),
    "FordB": (3636, 810, 2, 500),
    "FordA": (3601, 1320, 2, 500),
    "Wafer": (1000, 6164, 2, 152),
    "TwoPatterns": (1000, 4000, 4, 128),
    "StarLightCurves": (1000, 8236, 3, 1024),
    "UWaveGestureLibraryAll": (896, 3582, 8, 945),
    "ECG5000": (500, 4500, 5, 140),
    "ShapesAll": (600, 600, 60, 512),
    "Mallat": (55, 2345, 8, 1024),
    "Symbols": (25, 995, 6, 398),
    "SonyAIBORobotSurface2": (27, 953, 2, 65),
    "SonyAIBORobotSurface1": (20, 601, 2, 70),
}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSeriesDataset:
    name: str
    series: np.ndarray  # (N, L) float64
    labels: np.ndarray  # (N,) int64, contiguous 0..C-1
    split: str  # "train" | "test" | "validation"
    norm_stats: Optional[tuple[float, float]] = None

    @property
    def n_samples(self) -> int:
        return self.series.shape[0]

    @property
    def length(self) -> int:
        return self.series.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def subset(self, idx: np.ndarray, split: Optional[str] = None) -> "TimeSeriesDataset":
        return replace(self, series=self.series[idx], labels=self.labels[idx], split=split or self.split)


def data_root(default: Optional[os.PathLike] = None) -> Path:
    """Resolve the dataset root, letting the environment override ``default``."""
    env = os.environ.get(DATA_ROOT_ENV)
    if env:
        return Path(env)
    if default is None:
        return Path("data")
    return Path(default)


def read_ucr_tsv(path: os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Parse one ``<label>\\t<v1>...\\t<vL>`` file into raw labels and a value matrix."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    labels: list[float] = []
    rows: list[list[float]] = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split("\t") if "\t" in line else line.split(",")
            try:
                values = [float(c) for c in cells]
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
            if len(values) < 2:
                raise DatasetError(f"{path}:{lineno}: row has no values")
            if not np.all(np.isfinite(values)):
                raise DatasetError(f"{path}:{lineno}: missing or non-finite value")
            if rows and len(values) - 1 != len(rows[0]):
                raise DatasetError(
                    f"{path}:{lineno}: ragged row of length {len(values) - 1}, expected {len(rows[0])}"
                )
            labels.append(values[0])
            rows.append(values[1:])
    if not rows:
        raise DatasetError(f"{path}: empty file")
    return np.asarray(labels), np.asarray(rows, dtype=np.float64)


def load_ucr(path: os.PathLike, dataset_name: str) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    """Load ``<path>/<name>/<name>_TRAIN.tsv`` and ``_TEST.tsv``.

    Labels are remapped to ``0..C-1`` in sorted order of the raw train labels.
    For datasets listed in :data:`UCR_SUBSET` the shapes are checked against
    the archive's published sizes.
    """
    base = Path(path) / dataset_name
    raw_train, x_train = read_ucr_tsv(base / f"{dataset_name}_TRAIN.tsv")
    raw_test, x_test = read_ucr_tsv(base / f"{dataset_name}_TEST.tsv")
    if x_train.shape[1] != x_test.shape[1]:
        raise DatasetError(
            f"{dataset_name}: train length {x_train.shape[1]} != test length {x_test.shape[1]}"
        )

    classes = np.unique(raw_train)
    mapping = {c: i for i, c in enumerate(classes)}
    missing = sorted(set(np.unique(raw_test)) - set(classes))
    if missing:
        raise DatasetError(f"{dataset_name}: test labels {missing} absent from the train split")
    y_train = np.array([mapping[c] for c in raw_train], dtype=np.int64)
    y_test = np.array([mapping[c] for c in raw_test], dtype=np.int64)

    if dataset_name in UCR_SUBSET:
        expected = UCR_SUBSET[dataset_name]
        found = (len(y_train), len(y_test), len(classes), x_train.shape[1])
        if found != expected:
            raise DatasetError(f"{dataset_name}: shape {found} does not match archive {expected}")

    return (
        TimeSeriesDataset(dataset_name, x_train, y_train, "train"),
        TimeSeriesDataset(dataset_name, x_test, y_test, "test"),
    )


def normalize(
    ds_train: TimeSeriesDataset, ds_test: TimeSeriesDataset
) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    """Standardize both splits with the train split's global mean and std."""
    if ds_train.norm_stats is not None or ds_test.norm_stats is not None:
        raise DatasetError("dataset is already normalized")
    mean = float(ds_train.series.mean())
    std = float(ds_train.series.std())
    if not std > 0:
        raise DatasetError(f"{ds_train.name}: train split has zero variance")
    stats = (mean, std)
    return (
        replace(ds_train, series=(ds_train.series - mean) / std, norm_stats=stats),
        replace(ds_test, series=(ds_test.series - mean) / std, norm_stats=stats),
    )


def denormalize(x: np.ndarray, norm_stats: tuple[float, float]) -> np.ndarray:
    mean, std = norm_stats
    return np.asarray(x) * std + mean


def split_validation(
    ds_train: TimeSeriesDataset, fraction: float = 0.2, seed: int = 0
) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    """Hold out ``fraction`` of the train split, stratified when every class allows it."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    idx = np.arange(ds_train.n_samples)
    try:
        tr, va = train_test_split(idx, test_size=fraction, random_state=seed, stratify=ds_train.labels)
    except ValueError:
        # a class too small to stratify
        tr, va = train_test_split(idx, test_size=fraction, random_state=seed)
    tr, va = np.sort(tr), np.sort(va)
    return ds_train.subset(tr, "train"), ds_train.subset(va, "validation")


def write_ucr_tsv(path: os.PathLike, series: np.ndarray, labels: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for y, row in zip(labels, series):
            fh.write("\t".join([str(int(y))] + [repr(float(v)) for v in row]) + "\n")
