from .losses import (
    NonFiniteLossError,
    Stage1LossWeights,
    augmented_reconstruction_loss,
    codebook_loss,
    reconstruction_loss,
    stage1_total_loss,
)
from .model import NCVQVAE, LatentBatch, TokenizerConfig, naive_vq_loss
from .networks import auto_depth, latent_length
from .quantizer import VectorQuantizerEMA, nearest_codes
from .timefreq import TimeFrequency

__all__ = [
    "NonFiniteLossError",
    "Stage1LossWeights",
    "augmented_reconstruction_loss",
    "codebook_loss",
    "reconstruction_loss",
    "stage1_total_loss",
    "NCVQVAE",
    "LatentBatch",
    "TokenizerConfig",
    "naive_vq_loss",
    "auto_depth",
    "latent_length",
    "VectorQuantizerEMA",
    "nearest_codes",
    "TimeFrequency",
]
