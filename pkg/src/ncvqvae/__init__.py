"""Two-stage time-series generation: SSL-regularized VQ tokenizer plus masked transformer prior."""

__version__ = "0.1.0"
