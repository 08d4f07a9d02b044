from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import torch


class NonFiniteLossError(FloatingPointError):
    def __init__(self, part: str, value: float):
        super().__init__(f"non-finite loss component {part!r}: {value}")
        self.part = part


def _sq_err(a: torch.Tensor, b: torch.Tensor, reduction: str) -> torch.Tensor:
    err = (a - b).pow(2)
    if reduction == "mean":
        return err.mean()
    if reduction == "sum":
        return err.sum()
    raise ValueError(f"unknown reduction {reduction!r}")


def codebook_loss(z: torch.Tensor, z_q: torch.Tensor, beta: float = 1.0, reduction: str = "mean") -> torch.Tensor:
    """||sg[z] - z_q||^2 + beta * ||z - sg[z_q]||^2."""
    return _sq_err(z.detach(), z_q, reduction) + beta * _sq_err(z, z_q.detach(), reduction)


def reconstruction_loss(x, x_hat, u, u_hat, reduction: str = "mean") -> torch.Tensor:
    """Time-domain plus time-frequency squared error."""
    return _sq_err(x, x_hat, reduction) + _sq_err(u, u_hat, reduction)


# the second branch uses the same form
augmented_reconstruction_loss = reconstruction_loss


@dataclass
class Stage1LossWeights:
    eta: float = 0.0
    zeta: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("eta", "zeta", "beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def check_finite(parts: Mapping[str, torch.Tensor | float]) -> None:
    for name, value in parts.items():
        v = float(value.detach()) if isinstance(value, torch.Tensor) else float(value)
        if not math.isfinite(v):
            raise NonFiniteLossError(name, v)


def stage1_total_loss(parts: Mapping[str, torch.Tensor], weights: Stage1LossWeights, ssl_loss) -> torch.Tensor:
    """codebook + recons + eta * ssl + zeta * aug_recons.

    ``parts`` needs ``codebook``, ``recons`` and ``aug_recons``.
    """
    check_finite({**parts, "ssl": ssl_loss})
    vq = parts["codebook"] + parts["recons"]
    return vq + weights.eta * ssl_loss + weights.zeta * parts["aug_recons"]
