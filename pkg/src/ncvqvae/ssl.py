"""Non-contrastive objectives between the quantized and the augmented branch."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional

import torch
from torch import nn
from torch.nn import functional as F

METHODS = ("none", "barlow_twins", "vibcreg")


@dataclass
class SslConfig:
    method: str = "barlow_twins"
    proj_hidden: int = 4096
    proj_dim: int = 4096
    pooling: str = "mean"
    barlow_lambda: float = 0.005
    barlow_eta: Optional[float] = None  # None -> 1 / proj_dim
    barlow_eps: float = 1e-5
    vibcreg_sim_lambda: float = 25.0
    vibcreg_var_mu: float = 25.0
    vibcreg_cov_nu: float = 100.0
    vibcreg_eta: float = 0.01
    vibcreg_cov_mode: str = "normalized"  # or "vicreg"
    iternorm_iterations: int = 5
    iternorm_group_size: int = 64

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown ssl method {self.method!r}; expected one of {METHODS}")
        if self.vibcreg_cov_mode not in ("normalized", "vicreg"):
            raise ValueError(f"unknown covariance mode {self.vibcreg_cov_mode!r}")
        for name in ("barlow_lambda", "vibcreg_sim_lambda", "vibcreg_var_mu", "vibcreg_cov_nu", "vibcreg_eta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def eta(self) -> float:
        """Weight of the SSL term in the stage-1 objective."""
        if self.method == "barlow_twins":
            return 1.0 / self.proj_dim if self.barlow_eta is None else self.barlow_eta
        if self.method == "vibcreg":
            return self.vibcreg_eta
        return 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def make_projector(in_dim: int, hidden: int = 4096, out_dim: int = 4096) -> nn.Sequential:
    """Three linear layers; the first two are batch-normalized and followed by ReLU."""
    return nn.Sequential(
        nn.Linear(in_dim, hidden),
        nn.BatchNorm1d(hidden),
        nn.ReLU(),
        nn.Linear(hidden, hidden),
        nn.BatchNorm1d(hidden),
        nn.ReLU(),
        nn.Linear(hidden, out_dim),
    )


def pool(latents: torch.Tensor, mode: str = "mean") -> torch.Tensor:
    """Collapse the temporal axis of ``(B, T, D)`` latents."""
    if mode == "mean":
        return latents.mean(dim=1)
    if mode == "max":
        return latents.amax(dim=1)
    raise ValueError(f"unknown pooling {mode!r}")


def off_diagonal(m: torch.Tensor) -> torch.Tensor:
    n = m.shape[0]
    return m.flatten()[:-1].view(n - 1, n + 1)[:, 1:].flatten()


def barlow_twins_loss(e_a: torch.Tensor, e_b: torch.Tensor, lambd: float = 0.005, eps: float = 1e-5) -> torch.Tensor:
    """sum_i (1 - C_ii)^2 + lambd * sum_{i != j} C_ij^2 over the batch cross-correlation C."""
    if e_a.shape[0] < 2:
        raise ValueError("Barlow Twins needs a batch of at least 2")
    n = e_a.shape[0]
    a = (e_a - e_a.mean(0)) / torch.sqrt(e_a.var(0, unbiased=False) + eps)
    b = (e_b - e_b.mean(0)) / torch.sqrt(e_b.var(0, unbiased=False) + eps)
    c = a.T @ b / n
    on_diag = (1 - torch.diagonal(c)).pow(2).sum()
    off_diag = off_diagonal(c).pow(2).sum()
    return on_diag + lambd * off_diag


def iterative_whitening(
    e: torch.Tensor, iterations: int = 5, group_size: Optional[int] = None, eps: float = 1e-5
) -> torch.Tensor:
    """Approximate ZCA whitening of a ``(B, D)`` batch with Newton iterations.

    Features are whitened in independent groups of ``group_size`` columns
    (all columns when ``None``). ``group_size`` must divide ``D``.
    """
    m, d = e.shape
    if m < 2:
        raise ValueError("whitening needs a batch of at least 2")
    g = d if group_size is None else min(group_size, d)
    if d % g:
        raise ValueError(f"group size {g} does not divide feature dimension {d}")
    x = e.T.reshape(d // g, g, m)  # (groups, g, m)
    xc = x - x.mean(dim=2, keepdim=True)
    eye = torch.eye(g, dtype=e.dtype, device=e.device).expand(d // g, g, g)
    sigma = xc @ xc.transpose(1, 2) / m + eps * eye
    trace = sigma.diagonal(dim1=1, dim2=2).sum(-1)[:, None, None]
    sigma_n = sigma / trace
    p = eye
    for _ in range(iterations):
        p = 0.5 * (3 * p - torch.linalg.matrix_power(p, 3) @ sigma_n)
    w = p / trace.sqrt()
    return (w @ xc).reshape(d, m).T


def vibcreg_terms(e_a: torch.Tensor, e_b: torch.Tensor, cov_mode: str = "normalized") -> dict[str, torch.Tensor]:
    """Unweighted similarity, variance and covariance terms, each summed over both branches."""
    if e_a.shape[0] < 2:
        raise ValueError("VIbCReg needs a batch of at least 2")
    sim = F.mse_loss(e_a, e_b)
    var = e_a.new_zeros(())
    cov = e_a.new_zeros(())
    for e in (e_a, e_b):
        std = torch.sqrt(e.var(0) + 1e-4)
        var = var + F.relu(1 - std).mean()
        ec = e - e.mean(0)
        if cov_mode == "normalized":
            en = F.normalize(ec, p=2, dim=0)
            c = en.T @ en
            cov = cov + off_diagonal(c).pow(2).sum() / c.numel()
        else:
            c = ec.T @ ec / (e.shape[0] - 1)
            cov = cov + off_diagonal(c).pow(2).sum() / e.shape[1]
    return {"sim": sim, "var": var, "cov": cov}


def vibcreg_loss(e_a: torch.Tensor, e_b: torch.Tensor, config: SslConfig) -> torch.Tensor:
    t = vibcreg_terms(e_a, e_b, config.vibcreg_cov_mode)
    return config.vibcreg_sim_lambda * t["sim"] + config.vibcreg_var_mu * t["var"] + config.vibcreg_cov_nu * t["cov"]


class SslHead(nn.Module):
    """Shared projector plus the configured loss over ``(z_q, z')`` latents."""

    def __init__(self, latent_dim: int, config: SslConfig):
        super().__init__()
        if config.method == "none":
            raise ValueError("SslHead requires an SSL method")
        self.config = config
        self.projector = make_projector(latent_dim, config.proj_hidden, config.proj_dim)

    def embed(self, latents: torch.Tensor) -> torch.Tensor:
        e = self.projector(pool(latents, self.config.pooling))
        if self.config.method == "vibcreg":
            e = iterative_whitening(e, self.config.iternorm_iterations, self.config.iternorm_group_size)
        return e

    def forward(self, z_q: torch.Tensor, z_prime: torch.Tensor) -> torch.Tensor:
        e_a, e_b = self.embed(z_q), self.embed(z_prime)
        if self.config.method == "barlow_twins":
            return barlow_twins_loss(e_a, e_b, self.config.barlow_lambda, self.config.barlow_eps)
        return vibcreg_loss(e_a, e_b, self.config)
