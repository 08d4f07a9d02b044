"""STFT view of a batch of series, stacked as real-valued channels."""

from __future__ import annotations

import torch


class TimeFrequency:
    """Invertible STFT with real and imaginary parts stacked along channels.

    ``forward`` maps ``(B, L)`` to ``(B, 2 * F, frames)`` where ``F = n_fft // 2 + 1``
    and ``frames = L // hop + 1``; channels ``0..F-1`` hold real parts and
    ``F..2F-1`` imaginary parts.
    """

    def __init__(self, n_fft: int = 8, hop: int = 4):
        if hop > n_fft:
            raise ValueError("hop must not exceed n_fft")
        self.n_fft = n_fft
        self.hop = hop

    @property
    def n_freq(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def channels(self) -> int:
        return 2 * self.n_freq

    def n_frames(self, length: int) -> int:
        return length // self.hop + 1

    def _window(self, ref: torch.Tensor) -> torch.Tensor:
        return torch.hann_window(self.n_fft, device=ref.device, dtype=ref.dtype)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        spec = torch.stft(
            x, self.n_fft, hop_length=self.hop, window=self._window(x),
            center=True, pad_mode="reflect", return_complex=True,
        )
        return torch.cat([spec.real, spec.imag], dim=1)

    __call__ = forward

    def inverse(self, u: torch.Tensor, length: int) -> torch.Tensor:
        f = self.n_freq
        spec = torch.complex(u[:, :f], u[:, f:])
        return torch.istft(
            spec, self.n_fft, hop_length=self.hop, window=self._window(u),
            center=True, length=length,
        )
