"""Stage 2: masked bidirectional transformer over token grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F


@dataclass
class PriorConfig:
    hidden_dim: int = 256
    layers: int = 4
    heads: int = 4
    ff_ratio: int = 1
    dropout: float = 0.1
    T_steps: int = 10
    schedule: str = "cosine"
    transfer_embeddings: bool = True
    freeze_embeddings: bool = False
    p_uncond: float = 0.2
    temperature: float = 1.0
    choice_noise: float = 0.0

    def __post_init__(self):
        if self.schedule != "cosine":
            raise ValueError(f"unsupported mask schedule {self.schedule!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def mask_schedule_gamma(r):
    """Cosine mask schedule: fraction of tokens still masked at progress ``r`` in [0, 1]."""
    arr = np.asarray(r, dtype=np.float64)
    if np.any(arr < 0) or np.any(arr > 1) or np.any(np.isnan(arr)):
        raise ValueError(f"schedule argument must lie in [0, 1], got {r}")
    out = np.where(arr == 1.0, 0.0, np.cos(0.5 * np.pi * arr))
    return float(out) if out.ndim == 0 else out


def masked_count(n_tokens: int, r: float) -> int:
    """ceil(n_tokens * gamma(r)); the 1e-9 slack absorbs rounding at exact integers."""
    return max(0, math.ceil(n_tokens * mask_schedule_gamma(r) - 1e-9))


class MaskedPrior(nn.Module):
    """Bidirectional transformer predicting code indices at masked positions.

    Token ids ``0..K-1`` are codes and ``K`` is the mask token. A class token
    is prepended to every sequence; id ``n_classes`` is the unconditional one.
    With ``codebook`` given and ``transfer_embeddings`` on, code embeddings
    are the Stage-1 codebook rows mapped to ``hidden_dim`` by a learned linear
    lift.
    """

    def __init__(
        self,
        n_codes: int,
        n_tokens: int,
        n_classes: int,
        config: PriorConfig | None = None,
        codebook: Optional[torch.Tensor] = None,
    ):
        super().__init__()
        self.config = config = config or PriorConfig()
        self.n_codes = n_codes
        self.mask_id = n_codes
        self.n_tokens = n_tokens
        self.n_classes = n_classes
        h = config.hidden_dim

        self.transferred = config.transfer_embeddings and codebook is not None
        if config.transfer_embeddings and codebook is None:
            raise ValueError("embedding transfer requested but no codebook given")
        if self.transferred:
            if codebook.shape[0] != n_codes:
                raise ValueError(f"codebook has {codebook.shape[0]} rows, expected {n_codes}")
            self.codebook = nn.Parameter(codebook.detach().clone(), requires_grad=not config.freeze_embeddings)
            self.lift = nn.Linear(codebook.shape[1], h, bias=False)
            nn.init.orthogonal_(self.lift.weight)
        else:
            self.code_embed = nn.Embedding(n_codes, h)
            if config.freeze_embeddings:
                self.code_embed.weight.requires_grad_(False)
        self.mask_embed = nn.Parameter(torch.randn(1, h))
        self.class_embed = nn.Embedding(n_classes + 1, h)
        self.pos = nn.Parameter(torch.zeros(1, n_tokens + 1, h))
        nn.init.trunc_normal_(self.pos, std=0.02)

        layer = nn.TransformerEncoderLayer(
            h, config.heads, h * config.ff_ratio, config.dropout,
            activation="gelu", batch_first=True, norm_first=True,
        )
        self.transformer = nn.TransformerEncoder(layer, config.layers, enable_nested_tensor=False)
        self.norm = nn.LayerNorm(h)
        self.head = nn.Linear(h, n_codes)

    @property
    def uncond_id(self) -> int:
        return self.n_classes

    def code_embeddings(self) -> torch.Tensor:
        if self.transferred:
            return self.lift(self.codebook)
        return self.code_embed.weight

    def token_table(self) -> torch.Tensor:
        """(K + 1, hidden) embedding table; the last row is the mask token."""
        return torch.cat([self.code_embeddings(), self.mask_embed], dim=0)

    def forward(self, indices: torch.Tensor, class_labels: Optional[torch.Tensor] = None) -> torch.Tensor:
        b = indices.shape[0]
        if class_labels is None:
            class_labels = torch.full((b,), self.uncond_id, dtype=torch.long, device=indices.device)
        tok = F.embedding(indices, self.token_table())
        cls = self.class_embed(class_labels)[:, None, :]
        h = torch.cat([cls, tok], dim=1) + self.pos
        h = self.transformer(h)
        return self.head(self.norm(h[:, 1:]))


def sample_mask(k: torch.Tensor, generator: Optional[torch.Generator] = None):
    """Draw r ~ U(0, 1) per row and mask max(1, ceil(gamma(r) * T)) random positions.

    Returns ``(mask, r)`` with ``mask`` boolean ``(B, T)``.
    """
    b, t = k.shape
    r = torch.rand(b, generator=generator, dtype=torch.float64)
    n = torch.as_tensor(mask_schedule_gamma(r.numpy()) * t).ceil().clamp(min=1).long()
    scores = torch.rand(b, t, generator=generator)
    ranks = scores.argsort(dim=1).argsort(dim=1)
    return ranks < n[:, None], r


def train_step(
    model: MaskedPrior,
    k: torch.Tensor,
    class_labels: Optional[torch.Tensor] = None,
    generator: Optional[torch.Generator] = None,
):
    """Masked-token cross-entropy for ground-truth grid ``k`` (B, T).

    Returns ``(loss, mask)``. Class labels are replaced by the unconditional
    token with probability ``p_uncond``.
    """
    mask, _ = sample_mask(k, generator)
    inputs = torch.where(mask, torch.full_like(k, model.mask_id), k)
    if class_labels is not None and model.config.p_uncond > 0:
        drop = torch.rand(k.shape[0], generator=generator) < model.config.p_uncond
        class_labels = torch.where(drop, torch.full_like(class_labels, model.uncond_id), class_labels)
    logits = model(inputs, class_labels)
    loss = F.cross_entropy(logits[mask], k[mask])
    if not torch.isfinite(loss):
        raise FloatingPointError(f"non-finite prior loss {loss.item()} ({int(mask.sum())} masked tokens)")
    return loss, mask


@torch.no_grad()
def iterative_decode(
    model: MaskedPrior,
    n: int,
    T_steps: Optional[int] = None,
    class_labels: Optional[torch.Tensor] = None,
    temperature: Optional[float] = None,
    generator: Optional[torch.Generator] = None,
    greedy: bool = False,
    choice_noise: Optional[float] = None,
    history: Optional[list] = None,
):
    """Fill an all-mask grid in ``T_steps`` rounds, committing the most confident tokens.

    After round ``t`` exactly ``ceil(T_lat * gamma(t / T_steps))`` positions stay
    masked. Returns ``(tokens, masked_counts)``; ``history``, if given, collects
    the grid after every round.
    """
    cfg = model.config
    steps = T_steps or cfg.T_steps
    temperature = cfg.temperature if temperature is None else temperature
    choice_noise = cfg.choice_noise if choice_noise is None else choice_noise
    t_lat = model.n_tokens
    device = model.pos.device
    idx = torch.full((n, t_lat), model.mask_id, dtype=torch.long, device=device)
    if class_labels is not None:
        class_labels = torch.as_tensor(class_labels, dtype=torch.long, device=device).expand(n)
    counts = []
    for t in range(1, steps + 1):
        unknown = idx == model.mask_id
        logits = model(idx, class_labels)
        if greedy or temperature == 0:
            probs = logits.softmax(-1)
            sampled = probs.argmax(-1)
        else:
            probs = (logits / temperature).softmax(-1)
            sampled = torch.multinomial(probs.reshape(-1, model.n_codes), 1, generator=generator).reshape(n, t_lat)
        conf = probs.gather(-1, sampled[..., None])[..., 0].double()
        if choice_noise > 0:
            u = torch.rand(conf.shape, generator=generator, dtype=torch.float64).clamp(1e-20, 1.0)
            conf = conf.log() + choice_noise * (1 - t / steps) * -torch.log(-torch.log(u))
        sampled = torch.where(unknown, sampled, idx)
        conf = torch.where(unknown, conf, torch.full_like(conf, math.inf))

        remain = masked_count(t_lat, t / steps)
        ranks = conf.argsort(dim=1).argsort(dim=1)
        idx = torch.where(ranks < remain, torch.full_like(idx, model.mask_id), sampled)
        counts.append(remain)
        if history is not None:
            history.append(idx.clone())
    return idx, counts


@torch.no_grad()
def generate(
    prior: MaskedPrior,
    tokenizer,
    n: int,
    class_label: Optional[int] = None,
    norm_stats: Optional[tuple[float, float]] = None,
    generator: Optional[torch.Generator] = None,
    batch_size: int = 256,
) -> np.ndarray:
    """Sample ``n`` series: decode token grids, look up codes, run the Stage-1 decoder."""
    prior.eval()
    tokenizer.eval()
    out = []
    for start in range(0, n, batch_size):
        m = min(batch_size, n - start)
        labels = None if class_label is None else torch.full((m,), int(class_label), dtype=torch.long)
        k, _ = iterative_decode(prior, m, class_labels=labels, generator=generator)
        out.append(tokenizer.decode_tokens(k).cpu().numpy())
    x = np.concatenate(out, axis=0) if out else np.zeros((0, tokenizer.length))
    if norm_stats is not None:
        mean, std = norm_stats
        x = x * std + mean
    return x
