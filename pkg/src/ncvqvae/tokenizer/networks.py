from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F


def latent_length(n_frames: int, depth: int) -> int:
    """Token count after ``depth`` stride-2 convolutions (kernel 4, padding 1) over ``n_frames``."""
    t = n_frames
    for _ in range(depth):
        t = t // 2
    return t


def auto_depth(n_frames: int, max_tokens: int = 64) -> int:
    """Smallest downsampling depth >= 1 leaving at most ``max_tokens`` latent steps."""
    depth = 1
    while latent_length(n_frames, depth) > max_tokens:
        depth += 1
    if latent_length(n_frames, depth) < 1:
        raise ValueError(f"{n_frames} frames are too few to downsample")
    return depth


class ResBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv1d(channels, channels, 3, padding=1),
            nn.BatchNorm1d(channels),
            nn.LeakyReLU(0.2),
            nn.Conv1d(channels, channels, 1),
        )

    def forward(self, x):
        return x + self.block(x)


class Encoder(nn.Module):
    """(B, C_in, frames) -> (B, T_lat, D)."""

    def __init__(self, in_channels: int, hidden: int, latent_dim: int, depth: int, n_res: int = 2):
        super().__init__()
        layers: list[nn.Module] = [nn.Conv1d(in_channels, hidden, 3, padding=1)]
        for _ in range(depth):
            layers += [nn.Conv1d(hidden, hidden, 4, stride=2, padding=1), nn.BatchNorm1d(hidden), nn.LeakyReLU(0.2)]
        layers += [ResBlock(hidden) for _ in range(n_res)]
        layers += [nn.Conv1d(hidden, latent_dim, 1)]
        self.net = nn.Sequential(*layers)

    def forward(self, u: torch.Tensor) -> torch.Tensor:
        return self.net(u).transpose(1, 2)


class Decoder(nn.Module):
    """(B, T_lat, D) -> (B, C_out, frames); the last step interpolates to the exact frame count."""

    def __init__(self, out_channels: int, hidden: int, latent_dim: int, depth: int, n_frames: int, n_res: int = 2):
        super().__init__()
        self.n_frames = n_frames
        layers: list[nn.Module] = [nn.Conv1d(latent_dim, hidden, 3, padding=1)]
        layers += [ResBlock(hidden) for _ in range(n_res)]
        for _ in range(depth):
            layers += [nn.ConvTranspose1d(hidden, hidden, 4, stride=2, padding=1), nn.BatchNorm1d(hidden), nn.LeakyReLU(0.2)]
        layers += [nn.Conv1d(hidden, out_channels, 3, padding=1)]
        self.net = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        u = self.net(z.transpose(1, 2))
        if u.shape[-1] != self.n_frames:
            u = F.interpolate(u, size=self.n_frames, mode="linear", align_corners=False)
        return u
