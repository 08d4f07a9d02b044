from __future__ import annotations

import torch
from torch import nn


def nearest_codes(z: torch.Tensor, embeddings: torch.Tensor) -> torch.Tensor:
    """Index of the closest codebook row for every vector in ``z`` (..., D); ties go to the lowest index."""
    flat = z.reshape(-1, z.shape[-1])
    dist = (flat[:, None, :] - embeddings[None, :, :]).pow(2).sum(-1)
    return dist.argmin(dim=1).reshape(z.shape[:-1])


class VectorQuantizerEMA(nn.Module):
    """Nearest-neighbour codebook whose rows track the assigned latents by EMA.

    The codebook lives in buffers, not parameters: it receives no gradient and
    is moved only by :meth:`ema_update`. Rows are seeded from the first
    training batch.
    """

    def __init__(self, n_codes: int = 32, dim: int = 64, decay: float = 0.9, eps: float = 1e-5):
        super().__init__()
        self.n_codes = n_codes
        self.dim = dim
        self.decay = decay
        self.eps = eps
        self.register_buffer("embeddings", torch.randn(n_codes, dim))
        self.register_buffer("ema_cluster_size", torch.ones(n_codes))
        self.register_buffer("ema_embed_sum", self.embeddings.clone())
        self.register_buffer("initialized", torch.tensor(False))

    @torch.no_grad()
    def init_from(self, z: torch.Tensor) -> None:
        flat = z.reshape(-1, self.dim)
        if flat.shape[0] >= self.n_codes:
            idx = torch.randperm(flat.shape[0], device=flat.device)[: self.n_codes]
        else:
            idx = torch.randint(flat.shape[0], (self.n_codes,), device=flat.device)
        self.embeddings.copy_(flat[idx])
        self.ema_embed_sum.copy_(self.embeddings)
        self.ema_cluster_size.fill_(1.0)
        self.initialized.fill_(True)

    @torch.no_grad()
    def ema_update(self, z: torch.Tensor, k: torch.Tensor) -> None:
        flat = z.reshape(-1, self.dim)
        onehot = nn.functional.one_hot(k.reshape(-1), self.n_codes).to(flat.dtype)
        counts = onehot.sum(0)
        sums = onehot.T @ flat
        d = self.decay
        self.ema_cluster_size.mul_(d).add_(counts, alpha=1 - d)
        self.ema_embed_sum.mul_(d).add_(sums, alpha=1 - d)
        # Laplace smoothing keeps empty clusters away from division by zero
        n = self.ema_cluster_size.sum()
        size = (self.ema_cluster_size + self.eps) / (n + self.n_codes * self.eps) * n
        self.embeddings.copy_(self.ema_embed_sum / size[:, None])

    def lookup(self, k: torch.Tensor) -> torch.Tensor:
        return self.embeddings[k]

    def forward(self, z: torch.Tensor, update: bool | None = None):
        """Quantize ``z`` (B, T, D).

        Returns ``(z_q_st, z_q, k)``: the straight-through output whose gradient
        w.r.t. ``z`` is the identity, the raw codebook rows, and the indices.
        """
        if update is None:
            update = self.training
        if update and not bool(self.initialized):
            self.init_from(z.detach())
        k = nearest_codes(z.detach(), self.embeddings)
        z_q = self.embeddings[k]
        if update:
            self.ema_update(z.detach(), k)
        z_q_st = z + (z_q - z).detach()
        return z_q_st, z_q, k
