"""Experiment configuration: nested dataclasses, YAML round trip and hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .augmentations import AugmentationSpec
from .evaluation.feature_extractor import FeatureExtractorConfig
from .prior import PriorConfig
from .ssl import SslConfig
from .tokenizer.model import TokenizerConfig


@dataclass
class TrainConfig:
    batch_size: int = 128
    lr: float = 1e-3
    weight_decay: float = 1e-5
    epochs: int = 1000


@dataclass
class EvalConfig:
    n_runs: int = 4
    n_generate: Optional[int] = None  # None -> size of the test split
    n_plot: int = 50
    probe_representation: str = "flatten"  # or "pool"
    feature_extractor: FeatureExtractorConfig = field(default_factory=FeatureExtractorConfig)
    fe_cache_dir: Optional[str] = None  # None -> <out>/fe_cache


@dataclass
class ExperimentConfig:
    dataset: str = "TwoPatterns"
    data_root: Optional[str] = None
    seed: int = 0
    out_dir: str = "runs/default"
    val_fraction: float = 0.2
    augmentation: AugmentationSpec = field(default_factory=AugmentationSpec)
    ssl: SslConfig = field(default_factory=SslConfig)
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    stage1: TrainConfig = field(default_factory=lambda: TrainConfig(batch_size=128))
    prior: PriorConfig = field(default_factory=PriorConfig)
    stage2: TrainConfig = field(default_factory=lambda: TrainConfig(batch_size=256))
    eval: EvalConfig = field(default_factory=EvalConfig)
    profile: str = "full"

    def __post_init__(self):
        # the naive baseline has neither the SSL term nor the augmented reconstruction
        if self.ssl.method == "none":
            self.tokenizer.zeta = 0.0

    def to_dict(self) -> dict:
        return _to_plain(self)

    def stage1_dict(self) -> dict:
        d = self.to_dict()
        return {k: d[k] for k in ("dataset", "seed", "val_fraction", "augmentation", "ssl", "tokenizer", "stage1")}

    @property
    def config_hash(self) -> str:
        d = self.to_dict()
        for k in ("out_dir", "data_root"):
            d.pop(k)
        d["eval"].pop("fe_cache_dir")
        return _hash(d)

    @property
    def stage1_hash(self) -> str:
        return _hash(self.stage1_dict())


def _hash(d: dict) -> str:
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _to_plain(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def _build(cls, data: dict, where: str = ""):
    hints = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(hints)
    if unknown:
        raise KeyError(f"unknown config keys at {where or 'top level'}: {sorted(unknown)}")
    base = cls()
    kwargs = {}
    for name, f in hints.items():
        if name not in data:
            continue
        value = data[name]
        current = getattr(base, name)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            value = _build(type(current), value, f"{where}{name}.")
        elif isinstance(current, tuple) and isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    return cls(**kwargs)


PROFILES: dict[str, dict] = {
    "full": {},
    "desk": {
        "stage1": {"epochs": 200},
        "stage2": {"epochs": 200},
        "eval": {"feature_extractor": {"epochs": 50}},
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def make_config(overrides: Optional[dict] = None, profile: Optional[str] = None) -> ExperimentConfig:
    """Defaults, then the named profile, then ``overrides``."""
    overrides = dict(overrides or {})
    profile = profile or overrides.get("profile", "full")
    if profile not in PROFILES:
        raise KeyError(f"unknown profile {profile!r}; available: {sorted(PROFILES)}")
    merged = _merge(PROFILES[profile], overrides)
    merged["profile"] = profile
    return _build(ExperimentConfig, merged)


def load_config(path: Path | str) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    data.pop("config_hash", None)  # derived, written by save_config
    return make_config(data)


def save_config(config: ExperimentConfig, path: Path | str) -> None:
    """Write every field, defaults included, so archived runs are self-describing."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = config.to_dict()
    d["config_hash"] = config.config_hash
    with open(path, "w") as fh:
        yaml.safe_dump(d, fh, sort_keys=False)


def config_from_dict(d: dict) -> ExperimentConfig:
    d = {k: v for k, v in d.items() if k != "config_hash"}
    return _build(ExperimentConfig, d)
