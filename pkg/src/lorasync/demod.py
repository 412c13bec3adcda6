"""Dechirp + DFT symbol decisions.

All functions accept a single chunk of length N or a stack of chunks with
shape ``(..., N)``; the last axis is always the sample axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import dft
from .waveform import _base_upchirp

__all__ = ["DemodResult", "dechirp", "demod_symbol", "demod_corrected", "phi_ramp"]


@dataclass(frozen=True)
class DemodResult:
    s_hat: int
    spectrum: np.ndarray
    peak_mag: float


def _as_chunk(chunk) -> np.ndarray:
    x = np.asarray(getattr(chunk, "samples", chunk))
    n = x.shape[-1]
    if n & (n - 1) or n < 4:
        raise ValueError(f"chunk length must be a power of two >= 4, got {n}")
    return x


def dechirp(chunk, direction: str = "up") -> np.ndarray:
    """Multiply by the conjugate reference: x0* for upchirps, x0 for downchirps."""
    x = _as_chunk(chunk)
    ref = _base_upchirp(x.shape[-1])
    if direction == "up":
        return x * np.conj(ref)
    if direction == "down":
        return x * ref
    raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")


def phi_ramp(n: int, phi_hat: float, chunk_index=0) -> np.ndarray:
    """exp(-j2*pi*phi_hat*(i + k/n)); ``chunk_index`` may be an array of indices."""
    i = np.asarray(chunk_index, dtype=np.float64)[..., None]
    return np.exp(-2j * np.pi * phi_hat * (i + np.arange(n) / n))


def demod_symbol(chunk, direction: str = "up") -> DemodResult:
    spec = dft(dechirp(chunk, direction))
    mag = np.abs(spec)
    k = int(np.argmax(mag))  # first maximum wins ties
    return DemodResult(k, spec, float(mag[k]))


def demod_corrected(chunk, phi_hat: float, l_hat: int):
    """Symbol decision after removing fractional CFO ``phi_hat`` and integer CFO ``l_hat``.

    Returns an int for one chunk, an integer array for a stack.
    """
    y = dechirp(chunk, "up")
    n = y.shape[-1]
    if phi_hat:
        y = y * np.exp(-2j * np.pi * phi_hat * np.arange(n) / n)
    k = np.argmax(np.abs(dft(y)), axis=-1)
    s = (k - l_hat) % n
    return int(s) if np.ndim(s) == 0 else s
