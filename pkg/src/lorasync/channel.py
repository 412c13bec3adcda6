"""Truth impairments: sampling time offset, carrier frequency offset, AWGN."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .waveform import FrameConfig, IqSignal, LoraParams, render_frame

__all__ = [
    "Impairments",
    "ChannelOutput",
    "decompose",
    "apply_sto",
    "apply_cfo",
    "add_awgn",
    "noise_variance",
    "transmit",
    "GUARD_PREFIX_SYMBOLS",
    "GUARD_SUFFIX_SYMBOLS",
]

GUARD_PREFIX_SYMBOLS = 4
GUARD_SUFFIX_SYMBOLS = 1


def decompose(x: float) -> tuple[int, float]:
    """Split ``x`` into an integer and a remainder in (-0.5, 0.5]."""
    k = math.ceil(x - 0.5)
    return int(k), x - k


@dataclass(frozen=True)
class Impairments:
    cfo_bins: float = 0.0
    sto_samples: float = 0.0
    snr_db: float = math.inf

    @property
    def l(self) -> int:
        return decompose(self.cfo_bins)[0]

    @property
    def phi(self) -> float:
        return decompose(self.cfo_bins)[1]

    @property
    def m(self) -> int:
        return decompose(self.sto_samples)[0]

    @property
    def lam(self) -> float:
        return decompose(self.sto_samples)[1]


@dataclass(frozen=True)
class ChannelOutput:
    signal: IqSignal
    truth: Impairments
    guard_prefix: int


def apply_sto(frame: IqSignal, sto_samples: float, guard: int = 0,
              suffix: int = 0) -> tuple[IqSignal, float]:
    """Delay a pre-rendered frame on the oversample grid.

    The receiver's chunk grid starts at stream index 0; ``guard`` rate-B
    samples of silence come first and the chunk at ``guard`` sees the frame
    ``round(sto_samples * R)`` oversamples in. Returns the delayed stream and
    the effective (grid-quantised) STO in rate-B samples.
    """
    if sto_samples < 0:
        raise ValueError(f"sto_samples must be non-negative, got {sto_samples}")
    r = frame.rate_mult
    d = int(round(sto_samples * r))
    lead = r * guard - d
    x = frame.samples
    if lead >= 0:
        x = np.concatenate([np.zeros(lead, dtype=complex), x])
    else:
        x = x[-lead:]
    if suffix:
        x = np.concatenate([x, np.zeros(r * suffix, dtype=complex)])
    return IqSignal(x, r), d / r


def apply_cfo(sig: IqSignal, cfo_bins: float, n: int) -> IqSignal:
    """Rotate by ``cfo_bins / (n * R)`` cycles per oversample, continuous over the stream."""
    if cfo_bins == 0:
        return sig
    k = np.arange(len(sig.samples))
    rot = np.exp(2j * np.pi * (cfo_bins / (n * sig.rate_mult)) * k)
    return IqSignal(sig.samples * rot, sig.rate_mult)


def noise_variance(snr_db: float, r: int = 1) -> float:
    """Per-oversample noise power giving ``snr_db`` in bandwidth B for unit signal power."""
    return r * 10.0 ** (-snr_db / 10.0)


def add_awgn(sig: IqSignal, snr_db: float, rng: np.random.Generator) -> IqSignal:
    if math.isinf(snr_db) and snr_db > 0:
        return sig
    sigma = math.sqrt(noise_variance(snr_db, sig.rate_mult) / 2)
    shape = np.shape(sig.samples)
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return IqSignal(sig.samples + sigma * w, sig.rate_mult)


def transmit(params: LoraParams, cfg: FrameConfig, truth: Impairments,
             rng: np.random.Generator | None = None,
             guard: int | None = None, suffix: int | None = None) -> ChannelOutput:
    """Render what the ADC sees for one frame, with an exact (unquantised) STO.

    The frame is evaluated from its continuous-time definition at the
    receiver's sampling instants, so fractional delays below 1/R are
    represented exactly.
    """
    if truth.sto_samples < 0:
        raise ValueError("sto_samples must be non-negative")
    n, r = params.n, params.oversample
    guard = GUARD_PREFIX_SYMBOLS * n if guard is None else guard
    suffix = GUARD_SUFFIX_SYMBOLS * n if suffix is None else suffix
    total = r * (guard + cfg.n_chirps * n + suffix)
    k = np.arange(total)
    t = k / r - guard + truth.sto_samples
    cfo_phase = (truth.cfo_bins / (n * r)) * k if truth.cfo_bins else None
    x = IqSignal(render_frame(params, cfg, t, cfo_phase), r)
    if rng is not None:
        x = add_awgn(x, truth.snr_db, rng)
    elif not math.isinf(truth.snr_db):
        raise ValueError("a random generator is required for finite SNR")
    return ChannelOutput(x, truth, guard)
