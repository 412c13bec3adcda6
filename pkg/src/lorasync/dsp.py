"""FFT, anti-alias filter design and phase-selectable decimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .waveform import IqSignal

__all__ = ["FirFilter", "dft", "design_lowpass", "filter_stream", "filter_and_decimate"]

# Length 2*16*R + 1. Shorter filters attenuate the chirp band edges enough to
# cost a measurable fraction of a dB at the SNRs of interest.
DEFAULT_TAPS_PER_PHASE = 16


@dataclass(frozen=True)
class FirFilter:
    taps: np.ndarray
    group_delay: int


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def dft(x) -> np.ndarray:
    """Unnormalised forward DFT over the last axis (power-of-two lengths only)."""
    x = np.asarray(getattr(x, "samples", x))
    if not _is_pow2(x.shape[-1]):
        raise ValueError(f"DFT length must be a power of two, got {x.shape[-1]}")
    return np.fft.fft(x, axis=-1)


def design_lowpass(r: int, taps_per_phase: int = DEFAULT_TAPS_PER_PHASE) -> FirFilter:
    """Hamming-windowed sinc with cutoff 1/(2r) cycles per oversample, unit DC gain."""
    if r < 1:
        raise ValueError(f"oversampling ratio must be >= 1, got {r}")
    if r == 1:
        return FirFilter(np.ones(1), 0)
    half = taps_per_phase * r
    k = np.arange(-half, half + 1)
    taps = np.sinc(k / r) * np.hamming(2 * half + 1)
    taps /= taps.sum()
    return FirFilter(taps, half)


def filter_stream(x, filt: FirFilter) -> np.ndarray:
    """Zero-phase (delay-compensated) filtering over the last axis, same length."""
    x = np.asarray(getattr(x, "samples", x))
    if len(filt.taps) == 1:
        return x * filt.taps[0]
    taps = filt.taps.reshape((1,) * (x.ndim - 1) + (-1,))
    y = sps.oaconvolve(x, taps, mode="full", axes=-1)
    d = filt.group_delay
    return y[..., d:d + x.shape[-1]]


def filter_and_decimate(sig: IqSignal, filt: FirFilter, phase: int) -> IqSignal:
    r = sig.rate_mult
    if not 0 <= phase < r:
        raise ValueError(f"phase {phase} outside [0, {r})")
    y = filter_stream(sig.samples, filt)
    return IqSignal(y[phase::r], 1)
