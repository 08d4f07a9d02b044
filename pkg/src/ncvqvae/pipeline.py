"""Stage 1, Stage 2, generation and evaluation jobs over one run directory."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
import yaml

from .augmentations import augment_batch
from .config import ExperimentConfig, config_from_dict, save_config
from .data import TimeSeriesDataset, data_root, load_ucr, normalize, split_validation
from .evaluation import embed_2d, fid, inception_score, probe_accuracy, train_feature_extractor
from .evaluation import plots
from .prior import MaskedPrior, generate, train_step
from .tokenizer import NCVQVAE, NonFiniteLossError, reconstruction_loss

log = logging.getLogger(__name__)

STAGE1_COMPONENTS = ("recons", "codebook", "ssl", "aug_recons")


class StageAborted(RuntimeError):
    pass


class CheckpointMismatch(RuntimeError):
    pass


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


@dataclass
class Data:
    train: TimeSeriesDataset  # full normalized train split
    fit: TimeSeriesDataset  # train minus validation
    val: TimeSeriesDataset
    test: TimeSeriesDataset

    @property
    def norm_stats(self):
        return self.train.norm_stats


def prepare_data(cfg: ExperimentConfig) -> Data:
    train, test = load_ucr(data_root(cfg.data_root), cfg.dataset)
    train, test = normalize(train, test)
    fit, val = split_validation(train, cfg.val_fraction, seed=cfg.seed)
    return Data(train, fit, val, test)


def _batches(perm: np.ndarray, batch_size: int) -> list[np.ndarray]:
    chunks = [perm[i : i + batch_size] for i in range(0, len(perm), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        # batch norm cannot train on a single sample
        chunks[-2] = np.concatenate([chunks[-2], chunks.pop()])
    return chunks


def _f32(x) -> torch.Tensor:
    return torch.as_tensor(np.asarray(x), dtype=torch.float32)


def _append_jsonl(path: Path, record: dict) -> None:
    with path.open("a") as fh:
        fh.write(json.dumps(record) + "\n")


def read_jsonl(path: Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


# ---------------------------------------------------------------- stage 1


def build_tokenizer(cfg: ExperimentConfig, length: int) -> NCVQVAE:
    ssl = cfg.ssl if cfg.ssl.method != "none" else None
    return NCVQVAE(length, cfg.tokenizer, ssl)


@torch.no_grad()
def validation_recons(model: NCVQVAE, x: np.ndarray, batch_size: int = 512) -> float:
    was_training = model.training
    model.eval()
    total, n = 0.0, 0
    for i in range(0, len(x), batch_size):
        xb = _f32(x[i : i + batch_size])
        u = model.tf(xb)
        _, z_q, _ = model.quantize(model.encoder(u), update=False)
        x_hat, u_hat = model.decode(z_q)
        total += float(reconstruction_loss(xb, x_hat, u, u_hat)) * len(xb)
        n += len(xb)
    model.train(was_training)
    return total / max(n, 1)


def stage1_epoch(model, opt, sched, x: np.ndarray, cfg: ExperimentConfig, epoch: int, step_hook=None) -> dict:
    """One pass over ``x``; returns sample-weighted mean of each loss component."""
    torch.manual_seed(derive_seed(cfg.seed, 1, epoch))
    rng = np.random.default_rng([cfg.seed, 1, epoch])
    model.train()
    sums = dict.fromkeys(STAGE1_COMPONENTS, 0.0)
    n = 0
    for idx in _batches(rng.permutation(len(x)), cfg.stage1.batch_size):
        xb = x[idx]
        xa = augment_batch(xb, cfg.augmentation, rng) if model.ssl is not None else None
        total, parts = model.compute_losses(_f32(xb), None if xa is None else _f32(xa))
        opt.zero_grad()
        total.backward()
        opt.step()
        sched.step()
        for k in STAGE1_COMPONENTS:
            sums[k] += float(parts[k].detach()) * len(idx)
        n += len(idx)
        if step_hook is not None:
            step_hook(float(total.detach()), parts)
    return {k: v / n for k, v in sums.items()}


def _stage1_optim(model: NCVQVAE, cfg: ExperimentConfig, n_fit: int):
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.stage1.lr, weight_decay=cfg.stage1.weight_decay)
    steps = cfg.stage1.epochs * len(_batches(np.arange(n_fit), cfg.stage1.batch_size))
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=max(steps, 1))
    return opt, sched


def _stage1_blob(cfg, model, opt, sched, epoch, data: Data, best_val) -> dict:
    return {
        "kind": "stage1",
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash,
        "stage1_hash": cfg.stage1_hash,
        "length": model.length,
        "n_classes": data.train.n_classes,
        "norm_stats": list(data.norm_stats),
        "model": model.state_dict(),
        "optimizer": opt.state_dict(),
        "scheduler": sched.state_dict(),
        "epoch": epoch,
        "best_val": best_val,
    }


def run_stage1(
    cfg: ExperimentConfig,
    out_dir: Optional[Path] = None,
    data: Optional[Data] = None,
    resume: bool = False,
    stop_after: Optional[int] = None,
) -> Path:
    """Train the tokenizer; returns the path of the last checkpoint.

    Writes ``stage1/losses.jsonl`` (the four components per epoch),
    ``stage1/val_recons.jsonl``, ``ckpt_last.pt`` and ``ckpt_best.pt``.
    ``stop_after`` ends the job after that many epochs in total (for resuming later).
    """
    out = Path(out_dir or cfg.out_dir)
    stage_dir = out / "stage1"
    stage_dir.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.yaml")
    data = data or prepare_data(cfg)
    x = data.fit.series

    torch.manual_seed(derive_seed(cfg.seed, 1))
    model = build_tokenizer(cfg, data.train.length)
    opt, sched = _stage1_optim(model, cfg, len(x))
    start, best_val = 0, math.inf
    last = stage_dir / "ckpt_last.pt"
    if resume and last.exists():
        blob = torch.load(last, weights_only=False)
        if blob["stage1_hash"] != cfg.stage1_hash:
            raise CheckpointMismatch("stage-1 checkpoint was produced by a different configuration")
        model.load_state_dict(blob["model"])
        opt.load_state_dict(blob["optimizer"])
        sched.load_state_dict(blob["scheduler"])
        start, best_val = blob["epoch"] + 1, blob["best_val"]
        for name in ("losses.jsonl", "val_recons.jsonl"):
            kept = [r for r in read_jsonl(stage_dir / name) if r["epoch"] < start]
            (stage_dir / name).write_text("".join(json.dumps(r) + "\n" for r in kept))
    else:
        for name in ("losses.jsonl", "val_recons.jsonl"):
            (stage_dir / name).write_text("")

    end = cfg.stage1.epochs if stop_after is None else min(stop_after, cfg.stage1.epochs)
    t0 = time.time()
    for epoch in range(start, end):
        try:
            means = stage1_epoch(model, opt, sched, x, cfg, epoch)
        except NonFiniteLossError as exc:
            (stage_dir / "ABORTED").write_text(f"epoch {epoch}: {exc}\n")
            raise StageAborted(f"stage 1 aborted at epoch {epoch}: {exc}; last good checkpoint: {last}") from exc
        _append_jsonl(stage_dir / "losses.jsonl", {"epoch": epoch, **means})
        val = validation_recons(model, data.val.series) if data.val.n_samples else float("nan")
        _append_jsonl(stage_dir / "val_recons.jsonl", {"epoch": epoch, "recons": val})
        blob = _stage1_blob(cfg, model, opt, sched, epoch, data, min(best_val, val))
        if val < best_val:
            best_val = val
            torch.save(blob, stage_dir / "ckpt_best.pt")
        torch.save(blob, last)
        if epoch % 10 == 0 or epoch == end - 1:
            log.info("stage1 epoch %d %s val=%.4f (%.0fs)", epoch, {k: round(v, 4) for k, v in means.items()}, val, time.time() - t0)
    return last


def load_tokenizer(path: Path) -> tuple[NCVQVAE, dict]:
    blob = torch.load(path, weights_only=False)
    if blob.get("kind") != "stage1":
        raise CheckpointMismatch(f"{path} is not a stage-1 checkpoint")
    cfg = config_from_dict(blob["config"])
    model = build_tokenizer(cfg, blob["length"])
    model.load_state_dict(blob["model"])
    model.eval()
    return model, blob


@torch.no_grad()
def tokenize_dataset(model: NCVQVAE, x: np.ndarray, batch_size: int = 512):
    """Token grid ``k`` and quantized latents ``z_q`` for every row of ``x``."""
    model.eval()
    ks, zs = [], []
    for i in range(0, len(x), batch_size):
        lb = model.tokenize(_f32(x[i : i + batch_size]))
        ks.append(lb.k)
        zs.append(lb.z_q)
    return torch.cat(ks), torch.cat(zs)


# ---------------------------------------------------------------- stage 2


def build_prior(cfg: ExperimentConfig, tokenizer: NCVQVAE, n_classes: int) -> MaskedPrior:
    codebook = tokenizer.quantizer.embeddings if cfg.prior.transfer_embeddings else None
    return MaskedPrior(tokenizer.config.codebook_size, tokenizer.n_tokens, n_classes, cfg.prior, codebook)


def run_stage2(cfg: ExperimentConfig, stage1_ckpt: Path, out_dir: Optional[Path] = None, data: Optional[Data] = None) -> Path:
    """Train the masked prior on the frozen tokenizer's grids of the full train split."""
    out = Path(out_dir or cfg.out_dir)
    stage_dir = out / "stage2"
    stage_dir.mkdir(parents=True, exist_ok=True)
    tokenizer, s1 = load_tokenizer(stage1_ckpt)
    if s1["stage1_hash"] != cfg.stage1_hash:
        raise CheckpointMismatch(
            f"stage-1 checkpoint hash {s1['stage1_hash']} does not match config {cfg.stage1_hash}"
        )
    data = data or prepare_data(cfg)
    k, _ = tokenize_dataset(tokenizer, data.train.series)
    y = torch.as_tensor(data.train.labels, dtype=torch.long)

    torch.manual_seed(derive_seed(cfg.seed, 2))
    prior = build_prior(cfg, tokenizer, data.train.n_classes)
    params = [p for p in prior.parameters() if p.requires_grad]
    opt = torch.optim.AdamW(params, lr=cfg.stage2.lr, weight_decay=cfg.stage2.weight_decay)
    steps_per_epoch = math.ceil(len(k) / cfg.stage2.batch_size)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=max(cfg.stage2.epochs * steps_per_epoch, 1))
    (stage_dir / "losses.jsonl").write_text("")
    steps = 0
    t0 = time.time()
    for epoch in range(cfg.stage2.epochs):
        torch.manual_seed(derive_seed(cfg.seed, 2, epoch))
        g = torch.Generator().manual_seed(derive_seed(cfg.seed, 2, epoch, 1))
        perm = torch.randperm(len(k), generator=g)
        prior.train()
        ce_sum, masked, n = 0.0, 0, 0
        for i in range(0, len(k), cfg.stage2.batch_size):
            b = perm[i : i + cfg.stage2.batch_size]
            loss, mask = train_step(prior, k[b], y[b], g)
            opt.zero_grad()
            loss.backward()
            opt.step()
            sched.step()
            steps += 1
            ce_sum += float(loss.detach()) * len(b)
            masked += int(mask.sum())
            n += len(b)
        record = {"epoch": epoch, "ce": ce_sum / n, "mask_fraction": masked / (n * k.shape[1]), "steps": steps}
        _append_jsonl(stage_dir / "losses.jsonl", record)
        if epoch % 10 == 0 or epoch == cfg.stage2.epochs - 1:
            log.info("stage2 epoch %d ce=%.4f (%.0fs)", epoch, record["ce"], time.time() - t0)

    path = stage_dir / "ckpt.pt"
    torch.save(
        {
            "kind": "stage2",
            "config": cfg.to_dict(),
            "config_hash": cfg.config_hash,
            "stage1_hash": s1["stage1_hash"],
            "stage1_path": str(stage1_ckpt),
            "n_classes": data.train.n_classes,
            "norm_stats": s1["norm_stats"],
            "model": prior.state_dict(),
            "steps": steps,
        },
        path,
    )
    return path


def load_models(stage1_ckpt: Path, stage2_ckpt: Path):
    tokenizer, s1 = load_tokenizer(stage1_ckpt)
    s2 = torch.load(stage2_ckpt, weights_only=False)
    if s2.get("kind") != "stage2":
        raise CheckpointMismatch(f"{stage2_ckpt} is not a stage-2 checkpoint")
    if s2["stage1_hash"] != s1["stage1_hash"]:
        raise CheckpointMismatch(
            f"stage-2 checkpoint was trained on tokenizer {s2['stage1_hash']}, got {s1['stage1_hash']}"
        )
    cfg = config_from_dict(s2["config"])
    prior = MaskedPrior(
        tokenizer.config.codebook_size, tokenizer.n_tokens, s2["n_classes"], cfg.prior,
        tokenizer.quantizer.embeddings if cfg.prior.transfer_embeddings else None,
    )
    prior.load_state_dict(s2["model"])
    prior.eval()
    return tokenizer, prior, s2


def run_generate(
    stage1_ckpt: Path, stage2_ckpt: Path, n: int, out_path: Path, seed: int = 0,
    class_label: Optional[int] = None,
) -> np.ndarray:
    """Sample ``n`` denormalized series and write them one per row with a ``#`` metadata header."""
    tokenizer, prior, s2 = load_models(stage1_ckpt, stage2_ckpt)
    g = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)
    x = generate(prior, tokenizer, n, class_label, tuple(s2["norm_stats"]), g)
    meta = {
        "n": n, "length": tokenizer.length, "class_label": class_label, "seed": seed,
        "config_hash": s2["config_hash"], "stage1_hash": s2["stage1_hash"],
    }
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(out_path, x, delimiter=",", header=json.dumps(meta), comments="# ")
    return x


def read_samples(path: Path) -> tuple[np.ndarray, dict]:
    with open(path) as fh:
        meta = json.loads(fh.readline()[2:])
    return np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#")), meta


# ---------------------------------------------------------------- evaluation


@dataclass
class MetricsReport:
    knn_accuracy: float
    svm_accuracy: float
    fid: float
    is_score: float
    fid_runs: list[float] = field(default_factory=list)
    is_runs: list[float] = field(default_factory=list)
    run_seed: int = 0
    config_hash: str = ""

    def to_text(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if isinstance(v, list):
                v = ",".join(repr(float(e)) for e in v)
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MetricsReport":
        kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        return cls(
            knn_accuracy=float(kv["knn_accuracy"]),
            svm_accuracy=float(kv["svm_accuracy"]),
            fid=float(kv["fid"]),
            is_score=float(kv["is_score"]),
            fid_runs=[float(v) for v in kv["fid_runs"].split(",") if v],
            is_runs=[float(v) for v in kv["is_runs"].split(",") if v],
            run_seed=int(kv["run_seed"]),
            config_hash=kv["config_hash"],
        )


def _probe_reps(z_q: torch.Tensor, mode: str) -> np.ndarray:
    if mode == "pool":
        return z_q.mean(dim=1).numpy()
    return z_q.reshape(len(z_q), -1).numpy()


def probe_scores(tokenizer: NCVQVAE, data: Data, mode: str = "flatten") -> dict[str, float]:
    _, zq_train = tokenize_dataset(tokenizer, data.train.series)
    _, zq_test = tokenize_dataset(tokenizer, data.test.series)
    tr, te = _probe_reps(zq_train, mode), _probe_reps(zq_test, mode)
    return {
        "knn_accuracy": probe_accuracy(tr, data.train.labels, te, data.test.labels, "knn5"),
        "svm_accuracy": probe_accuracy(tr, data.train.labels, te, data.test.labels, "svm_linear"),
    }


def run_eval(
    cfg: ExperimentConfig, stage1_ckpt: Path, stage2_ckpt: Path,
    out_dir: Optional[Path] = None, data: Optional[Data] = None, figures: bool = True,
) -> MetricsReport:
    """Probe accuracies, FID/IS over ``eval.n_runs`` generation runs and the figure set."""
    out = Path(out_dir or cfg.out_dir)
    eval_dir = out / "eval"
    eval_dir.mkdir(parents=True, exist_ok=True)
    data = data or prepare_data(cfg)
    tokenizer, prior, s2 = load_models(stage1_ckpt, stage2_ckpt)
    if s2["stage1_hash"] != cfg.stage1_hash:
        raise CheckpointMismatch("checkpoints do not belong to this configuration")

    probes = probe_scores(tokenizer, data, cfg.eval.probe_representation)
    cache = Path(cfg.eval.fe_cache_dir) if cfg.eval.fe_cache_dir else out / "fe_cache"
    fe = train_feature_extractor(
        data.train.series, data.train.labels, data.test.series, data.test.labels,
        config=cfg.eval.feature_extractor, dataset_name=cfg.dataset, cache_dir=cache, seed=cfg.seed,
    )
    real_feats = fe.features(data.test.series)
    n_gen = cfg.eval.n_generate or data.test.n_samples
    n_classes = data.train.n_classes
    per_class = max(1, math.ceil(n_gen / n_classes))

    fid_runs, is_runs = [], []
    uncond = cond = None
    for run in range(cfg.eval.n_runs):
        g = torch.Generator().manual_seed(derive_seed(cfg.seed, 3, run))
        uncond = generate(prior, tokenizer, n_gen, None, None, g)
        fid_runs.append(fid(real_feats, fe.features(uncond)))
        cond = {c: generate(prior, tokenizer, per_class, c, None, g) for c in range(n_classes)}
        is_runs.append(inception_score(fe.class_probs(np.concatenate(list(cond.values())))))
    report = MetricsReport(
        knn_accuracy=probes["knn_accuracy"],
        svm_accuracy=probes["svm_accuracy"],
        fid=float(np.mean(fid_runs)),
        is_score=float(np.mean(is_runs)),
        fid_runs=fid_runs,
        is_runs=is_runs,
        run_seed=cfg.seed,
        config_hash=cfg.config_hash,
    )
    (eval_dir / "metrics.txt").write_text(report.to_text())
    if figures:
        make_figures(cfg, tokenizer, data, uncond, cond, eval_dir / "figures")
    return report


FIGURE_NAMES = (
    "samples_unconditional.png",
    "samples_conditional.png",
    "latents_tsne.png",
    "latents_pca.png",
    "generated_vs_test_tsne.png",
)


def make_figures(cfg, tokenizer, data: Data, uncond: np.ndarray, cond: dict, fig_dir: Path) -> list[Path]:
    n = cfg.eval.n_plot
    rng = np.random.default_rng(cfg.seed)
    stats = data.norm_stats
    test = data.test.series
    ref = test[rng.choice(len(test), size=min(n, len(test)), replace=False)]
    denorm = lambda a: a * stats[1] + stats[0]  # noqa: E731
    paths = [
        plots.plot_samples(denorm(uncond[:n]), fig_dir / FIGURE_NAMES[0], "unconditional", denorm(ref)),
        plots.plot_conditional({c: denorm(v[:n]) for c, v in cond.items()}, fig_dir / FIGURE_NAMES[1]),
    ]
    _, zq = tokenize_dataset(tokenizer, test)
    reps = zq.reshape(len(zq), -1).numpy()
    sub = rng.choice(len(reps), size=min(1000, len(reps)), replace=False)
    paths.append(plots.plot_embedding(embed_2d(reps[sub], "tsne", cfg.seed), data.test.labels[sub], fig_dir / FIGURE_NAMES[2], "t-SNE of z_q"))
    paths.append(plots.plot_embedding(embed_2d(reps[sub], "pca", cfg.seed), data.test.labels[sub], fig_dir / FIGURE_NAMES[3], "PCA of z_q"))
    m = min(500, len(test), len(uncond))
    both = np.concatenate([test[:m], uncond[:m]])
    flags = np.r_[np.zeros(m, bool), np.ones(m, bool)]
    paths.append(plots.plot_overlay(embed_2d(both, "tsne", cfg.seed), flags, fig_dir / FIGURE_NAMES[4], "generated vs test"))
    return paths


def summarize(run_dirs: list[Path]) -> list[dict]:
    """Group ``eval/metrics.txt`` reports by configuration (seed excluded), mean and std per metric."""
    groups: dict[str, list[tuple[dict, MetricsReport]]] = {}
    for d in run_dirs:
        d = Path(d)
        report = MetricsReport.from_text((d / "eval" / "metrics.txt").read_text())
        cfg = config_from_dict(yaml.safe_load((d / "config.yaml").read_text()))
        key_cfg = cfg.to_dict()
        for k in ("seed", "out_dir", "data_root"):
            key_cfg.pop(k)
        key = json.dumps(key_cfg, sort_keys=True)
        groups.setdefault(key, []).append((cfg, report))
    rows = []
    for members in groups.values():
        cfg = members[0][0]
        row = {
            "dataset": cfg.dataset,
            "ssl": cfg.ssl.method,
            "augmentation": cfg.augmentation.kind if cfg.ssl.method != "none" else "-",
            "n_seeds": len(members),
        }
        for metric in ("knn_accuracy", "svm_accuracy", "fid", "is_score"):
            vals = np.array([getattr(r, metric) for _, r in members])
            row[metric] = float(vals.mean())
            row[metric + "_std"] = float(vals.std())
        rows.append(row)
    return rows
