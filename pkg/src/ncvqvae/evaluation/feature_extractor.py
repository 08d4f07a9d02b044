"""Per-dataset supervised FCN used as the feature network for FID and IS."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from torch import nn

log = logging.getLogger(__name__)


@dataclass
class FeatureExtractorConfig:
    channels: tuple[int, int, int] = (128, 256, 128)
    kernels: tuple[int, int, int] = (8, 5, 3)
    epochs: int = 100
    batch_size: int = 128
    lr: float = 1e-3
    max_retries: int = 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["kernels"] = list(self.kernels)
        return d


class FCN(nn.Module):
    """Three conv blocks, global average pooling, linear class head."""

    def __init__(self, n_classes: int, channels=(128, 256, 128), kernels=(8, 5, 3)):
        super().__init__()
        blocks = []
        c_in = 1
        for c, k in zip(channels, kernels):
            blocks += [nn.Conv1d(c_in, c, k, padding="same"), nn.BatchNorm1d(c), nn.ReLU()]
            c_in = c
        self.body = nn.Sequential(*blocks)
        self.head = nn.Linear(c_in, n_classes)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x[:, None, :]).mean(dim=-1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x))


class FeatureExtractor:
    def __init__(self, model: FCN, test_accuracy: float = float("nan")):
        self.model = model.eval()
        self.test_accuracy = test_accuracy

    @torch.no_grad()
    def _run(self, x, fn, batch_size=512):
        x = torch.as_tensor(np.asarray(x), dtype=torch.float32)
        return torch.cat([fn(x[i : i + batch_size]) for i in range(0, len(x), batch_size)]).numpy()

    def features(self, x) -> np.ndarray:
        return self._run(x, self.model.features)

    def class_probs(self, x) -> np.ndarray:
        p = self._run(x, lambda b: self.model(b).double().softmax(-1).float())
        return p / p.sum(axis=1, keepdims=True)


def _fit(train_x, train_y, n_classes, config: FeatureExtractorConfig, lr: float, seed: int) -> Optional[FCN]:
    torch.manual_seed(seed)
    model = FCN(n_classes, config.channels, config.kernels)
    opt = torch.optim.AdamW(model.parameters(), lr=lr)
    x = torch.as_tensor(train_x, dtype=torch.float32)
    y = torch.as_tensor(train_y, dtype=torch.long)
    g = torch.Generator().manual_seed(seed)
    steps = config.epochs * math.ceil(len(x) / config.batch_size)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, max(steps, 1))
    model.train()
    for _ in range(config.epochs):
        perm = torch.randperm(len(x), generator=g)
        for i in range(0, len(x), config.batch_size):
            b = perm[i : i + config.batch_size]
            if len(b) < 2:
                continue
            loss = nn.functional.cross_entropy(model(x[b]), y[b])
            if not torch.isfinite(loss):
                return None
            opt.zero_grad()
            loss.backward()
            opt.step()
            sched.step()
    return model.eval()


def _cache_key(config: FeatureExtractorConfig, dataset_name: str, n_train: int, seed: int) -> str:
    blob = json.dumps({"cfg": config.to_dict(), "ds": dataset_name, "n": n_train, "seed": seed}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def train_feature_extractor(
    train_x, train_y, test_x=None, test_y=None, *,
    config: FeatureExtractorConfig | None = None,
    dataset_name: str = "dataset",
    cache_dir: Optional[Path] = None,
    seed: int = 0,
) -> FeatureExtractor:
    """Train (or load from ``cache_dir``) a supervised FCN on the train split.

    On divergence the learning rate is divided by 10 and training retried.
    """
    config = config or FeatureExtractorConfig()
    n_classes = int(np.max(train_y)) + 1
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"fcn_{dataset_name}_{_cache_key(config, dataset_name, len(train_x), seed)}.pt"
        if path.exists():
            blob = torch.load(path, weights_only=False)
            model = FCN(blob["n_classes"], config.channels, config.kernels)
            model.load_state_dict(blob["state"])
            log.info("loaded feature extractor from %s", path)
            return FeatureExtractor(model, blob["test_accuracy"])

    lr = config.lr
    model = None
    for attempt in range(config.max_retries + 1):
        model = _fit(train_x, train_y, n_classes, config, lr, seed)
        if model is not None:
            break
        log.warning("feature extractor diverged at lr=%g (attempt %d)", lr, attempt + 1)
        lr /= 10
    if model is None:
        raise FloatingPointError("feature extractor training diverged at every learning rate")

    fe = FeatureExtractor(model)
    if test_x is not None and test_y is not None:
        pred = fe.class_probs(test_x).argmax(1)
        fe.test_accuracy = float((pred == np.asarray(test_y)).mean())
        log.info("feature extractor test accuracy %.4f", fe.test_accuracy)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save({"state": model.state_dict(), "n_classes": n_classes, "test_accuracy": fe.test_accuracy}, path)
    return fe
