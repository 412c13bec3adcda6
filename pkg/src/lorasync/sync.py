"""Offset estimators and the decision rules used during synchronisation.

Conventions: ``n`` is the symbol length 2**sf. Integer offsets are in DFT
bins (CFO) or rate-B samples (STO); fractional parts live in [-0.5, 0.5].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dsp import dft
from .demod import phi_ramp

log = logging.getLogger(__name__)

__all__ = [
    "OffsetEstimate",
    "UpchirpAccumulator",
    "circular_distance",
    "detect_preamble",
    "estimate_phi_pair",
    "average_phi",
    "coherent_average",
    "side_bin_sign",
    "gamma_wrap",
    "estimate_l_naive",
    "estimate_l_corrected",
    "estimate_m",
    "estimate_lambda",
    "estimate_q",
    "valid_network_ids",
]


@dataclass
class OffsetEstimate:
    phi_hat: float = 0.0
    l_hat: int = 0
    m_hat: int = 0
    lambda_hat: float = 0.0
    q_hat: int = 0
    s_up: int = 0
    s_down: int = 0
    nu: int = 1
    nu_star: int = 1

    @property
    def cfo_bins(self) -> float:
        return self.l_hat + self.phi_hat

    @property
    def sto_samples(self) -> float:
        return self.m_hat + self.lambda_hat


@dataclass
class UpchirpAccumulator:
    """The three averaged bins around the upchirp peak, kept for the lambda estimate."""

    bins: np.ndarray  # Y[s_up - 1], Y[s_up], Y[s_up + 1]
    s_up: int
    chunk_count: int

    @classmethod
    def from_spectrum(cls, spectrum: np.ndarray, chunk_count: int = 1) -> "UpchirpAccumulator":
        n = len(spectrum)
        s = int(np.argmax(np.abs(spectrum)))
        bins = spectrum[[(s - 1) % n, s, (s + 1) % n]].copy()
        return cls(bins, s, chunk_count)


def circular_distance(d: int, n: int) -> int:
    d %= n
    return min(d, n - d)


def detect_preamble(history: Sequence[int], n: int) -> bool:
    """Five consecutive decisions within one bin of the first one."""
    if len(history) < 5:
        raise ValueError("need 5 demodulated symbols")
    h0 = history[0]
    return all(circular_distance(history[j] - h0, n) <= 1 for j in range(1, 5))


def estimate_phi_pair(chunk_i, chunk_next, tone_bins: int | None = None) -> float:
    """Fractional CFO from two consecutive dechirped chunks carrying the same symbol.

    arg(sum conj(y_i) * y_next) / 2pi, so a positive offset reads back
    positive. By default the sum runs over all samples. With ``tone_bins``
    the same inner product is taken in the DFT domain (Parseval) over that
    many bins centred on the common peak, which rejects most of the noise;
    consecutive chunks differ by exactly exp(j2*pi*phi), so the noiseless
    answer is unchanged.
    """
    a = np.asarray(getattr(chunk_i, "samples", chunk_i))
    b = np.asarray(getattr(chunk_next, "samples", chunk_next))
    if tone_bins is None:
        z = np.vdot(a, b)
    else:
        fa, fb = dft(a), dft(b)
        n = len(fa)
        k = int(np.argmax(np.abs(fa) + np.abs(fb)))
        sel = (k + np.arange(tone_bins) - tone_bins // 2) % n
        z = np.vdot(fa[sel], fb[sel])
    return float(np.angle(z) / (2 * np.pi))


def average_phi(estimates: Sequence[float]) -> float:
    est = np.asarray(estimates, dtype=np.float64)
    if est.size == 0:
        raise ValueError("no estimates to average")
    if est.max() - est.min() < 0.25:
        return float(est.mean())
    return float(np.angle(np.exp(2j * np.pi * est).mean()) / (2 * np.pi))


def coherent_average(chunks, phi_hat: float, start_chunk_index: int = 0) -> np.ndarray:
    """Average dechirped consecutive chunks after removing the fractional-CFO ramp, then DFT."""
    y = np.atleast_2d(np.asarray(chunks))
    n = y.shape[-1]
    idx = start_chunk_index + np.arange(y.shape[0])
    return dft((y * phi_ramp(n, phi_hat, idx)).mean(axis=0))


def side_bin_sign(spectrum: np.ndarray, peak: int) -> int:
    n = len(spectrum)
    right = abs(spectrum[(peak + 1) % n])
    left = abs(spectrum[(peak - 1) % n])
    return -1 if right < left else 1


def gamma_wrap(k: int, n: int) -> int:
    if not 0 <= k < n:
        raise ValueError(f"{k} outside [0, {n})")
    return k if k < n / 2 else k - n


def estimate_l_naive(s_up: int, s_down: int, n: int) -> int:
    return math.floor(gamma_wrap((s_up + s_down) % n, n) / 2)


def estimate_l_corrected(s_up: int, s_down: int, nu: int, nu_star: int, n: int) -> int:
    """Integer CFO with the side-bin correction term.

    The correction only applies when the sum of the two decisions is odd,
    i.e. when one of them has slipped by a bin; agreeing side-bin signs then
    tell which way. An even sum is left untouched.
    """
    total = s_up + s_down
    gamma = nu if (nu == nu_star and total % 2) else 0
    l_hat = math.floor(gamma_wrap((total + gamma) % n, n) / 2)
    return max(-n // 4, min(n // 4 - 1, l_hat))


def estimate_m(s_up: int, l_hat: int, n: int) -> int:
    return (s_up - l_hat) % n


def _three_bin_ratio(bins, m_hat: int, n: int) -> float | None:
    ym1, y0, yp1 = bins
    a = np.exp(-2j * np.pi * m_hat / n) * yp1
    b = np.exp(2j * np.pi * m_hat / n) * ym1
    den = 2 * y0 - a - b
    if abs(den) < 1e-12 * abs(y0) or abs(y0) == 0:
        return None
    return float(-np.real((a - b) / den))


def estimate_lambda(acc: UpchirpAccumulator, m_hat: int, n: int) -> float:
    """Fractional STO from the phase-corrected three-bin interpolator, clamped to [-0.5, 0.5]."""
    r = _three_bin_ratio(acc.bins, m_hat, n)
    if r is None:
        log.debug("degenerate three-bin denominator; lambda estimate set to 0")
        return 0.0
    return min(0.5, max(-0.5, r))


def valid_network_ids(n: int) -> np.ndarray:
    """Multiples of 3 that stay at least 3 apart around the circle of n bins."""
    return np.arange(0, n - 2, 3)


def estimate_q(s_sync: int, s_up: int, n: int) -> int:
    """Nearest valid network identifier to the sync/upchirp difference (circularly)."""
    d = (s_sync - s_up) % n
    ids = valid_network_ids(n)
    dist = np.minimum((ids - d) % n, (d - ids) % n)
    return int(ids[np.argmin(dist)])
