from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional

import torch
from torch import nn

from ..ssl import SslConfig, SslHead
from .losses import Stage1LossWeights, codebook_loss, reconstruction_loss, stage1_total_loss
from .networks import Decoder, Encoder, auto_depth, latent_length
from .quantizer import VectorQuantizerEMA
from .timefreq import TimeFrequency


@dataclass
class TokenizerConfig:
    n_fft: int = 8
    hop: int = 4
    hidden: int = 64
    n_res: int = 2
    depth: Optional[int] = None  # None -> smallest depth giving <= 64 tokens
    codebook_size: int = 32
    code_dim: int = 64
    decay: float = 0.9
    beta: float = 1.0
    smoothing_eps: float = 1e-5
    zeta: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LatentBatch:
    z: torch.Tensor
    z_q: torch.Tensor
    k: torch.Tensor
    z_prime: Optional[torch.Tensor] = None


class NCVQVAE(nn.Module):
    """Stage-1 tokenizer with an optional augmented, unquantized branch.

    Both branches share encoder and decoder. The decoder emits the stacked
    STFT; the time-domain reconstruction is its inverse transform.
    """

    def __init__(self, length: int, config: TokenizerConfig | None = None, ssl: SslConfig | None = None):
        super().__init__()
        self.config = config = config or TokenizerConfig()
        self.length = length
        self.tf = TimeFrequency(config.n_fft, config.hop)
        self.n_frames = self.tf.n_frames(length)
        self.depth = config.depth or auto_depth(self.n_frames)
        self.n_tokens = latent_length(self.n_frames, self.depth)
        ch = self.tf.channels
        self.encoder = Encoder(ch, config.hidden, config.code_dim, self.depth, config.n_res)
        self.decoder = Decoder(ch, config.hidden, config.code_dim, self.depth, self.n_frames, config.n_res)
        self.quantizer = VectorQuantizerEMA(config.codebook_size, config.code_dim, config.decay, config.smoothing_eps)
        self.ssl_config = ssl
        self.ssl = SslHead(config.code_dim, ssl) if ssl is not None and ssl.method != "none" else None

    @property
    def weights(self) -> Stage1LossWeights:
        if self.ssl is None:
            return Stage1LossWeights(eta=0.0, zeta=0.0, beta=self.config.beta)
        return Stage1LossWeights(eta=self.ssl_config.eta, zeta=self.config.zeta, beta=self.config.beta)

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        if not torch.isfinite(x).all():
            raise ValueError("non-finite input to encoder")
        return self.encoder(self.tf(x))

    def quantize(self, z: torch.Tensor, update: bool | None = None):
        return self.quantizer(z, update)

    def decode(self, latents: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if not torch.isfinite(latents).all():
            raise ValueError("non-finite latents passed to decoder")
        u_hat = self.decoder(latents)
        return self.tf.inverse(u_hat, self.length), u_hat

    @torch.no_grad()
    def tokenize(self, x: torch.Tensor) -> LatentBatch:
        """Frozen-model latents; does not touch the codebook."""
        z = self.encode(x)
        _, z_q, k = self.quantize(z, update=False)
        return LatentBatch(z=z, z_q=z_q, k=k)

    def decode_tokens(self, k: torch.Tensor) -> torch.Tensor:
        x_hat, _ = self.decode(self.quantizer.lookup(k))
        return x_hat

    def compute_losses(self, x: torch.Tensor, x_aug: torch.Tensor | None = None):
        """Return ``(total, parts)`` for one batch.

        ``parts`` always carries ``recons``, ``codebook``, ``ssl`` and ``aug_recons``;
        the last two are zero when the augmented branch is off.
        """
        u = self.tf(x)
        z = self.encoder(u)
        z_q_st, z_q, _ = self.quantizer(z)
        x_hat, u_hat = self.decode(z_q_st)
        parts = {
            "recons": reconstruction_loss(x, x_hat, u, u_hat),
            "codebook": codebook_loss(z, z_q, self.config.beta),
        }
        zero = x.new_zeros(())
        if self.ssl is not None and x_aug is not None:
            u_aug = self.tf(x_aug)
            z_prime = self.encoder(u_aug)
            x_hat_aug, u_hat_aug = self.decode(z_prime)
            parts["aug_recons"] = reconstruction_loss(x_aug, x_hat_aug, u_aug, u_hat_aug)
            ssl_loss = self.ssl(z_q_st, z_prime)
        else:
            parts["aug_recons"] = zero
            ssl_loss = zero
        total = stage1_total_loss(parts, self.weights, ssl_loss)
        parts["ssl"] = ssl_loss
        return total, parts


def naive_vq_loss(model: NCVQVAE, x: torch.Tensor) -> torch.Tensor:
    """Plain VQVAE objective (codebook + reconstruction), without the augmented branch."""
    u = model.tf(x)
    z = model.encoder(u)
    z_q_st, z_q, _ = model.quantizer(z)
    u_hat = model.decoder(z_q_st)
    x_hat = model.tf.inverse(u_hat, model.length)
    return codebook_loss(z, z_q, model.config.beta) + reconstruction_loss(x, x_hat, u, u_hat)
