"""Chirp generation and frame assembly.

Times are expressed in units of rate-B samples throughout: a chirp spans
``t in [0, N)`` with ``N = 2**sf``, and an oversampled stream at ratio ``R``
evaluates the continuous-time waveform at ``t = k / R``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "LoraParams",
    "FrameConfig",
    "IqSignal",
    "chirp_phase",
    "gen_upchirp",
    "gen_downchirp",
    "render_frame",
    "gen_oversampled_frame",
]


@dataclass(frozen=True)
class LoraParams:
    sf: int
    oversample: int = 1

    def __post_init__(self):
        if self.sf < 2:
            raise ValueError(f"spreading factor must be >= 2, got {self.sf}")
        if self.oversample < 1:
            raise ValueError(f"oversample must be >= 1, got {self.oversample}")

    @property
    def n(self) -> int:
        return 1 << self.sf


@dataclass(frozen=True)
class IqSignal:
    """Complex baseband samples tagged with their rate multiplier (1 = rate B)."""

    samples: np.ndarray
    rate_mult: int = 1

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class FrameConfig:
    n_up: int = 8
    n_sync: int = 2
    n_down: int = 2
    q: int = 0
    payload: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.q % 3:
            raise ValueError(f"network identifier must be a multiple of 3, got {self.q}")
        if min(self.n_up, self.n_sync, self.n_down) < 0:
            raise ValueError("chirp counts must be non-negative")
        object.__setattr__(self, "payload", tuple(int(s) for s in self.payload))

    @property
    def n_preamble(self) -> int:
        return self.n_up + self.n_sync + self.n_down

    @property
    def n_chirps(self) -> int:
        return self.n_preamble + len(self.payload)

    def chirp_table(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-chirp (symbol, is_down) arrays for the whole frame."""
        for s in (self.q, *self.payload):
            if not 0 <= s < n:
                raise ValueError(f"symbol {s} outside [0, {n})")
        symbols = np.concatenate([
            np.zeros(self.n_up, dtype=np.int64),
            np.full(self.n_sync, self.q, dtype=np.int64),
            np.zeros(self.n_down, dtype=np.int64),
            np.asarray(self.payload, dtype=np.int64),
        ])
        is_down = np.zeros(self.n_chirps, dtype=bool)
        is_down[self.n_up + self.n_sync:self.n_preamble] = True
        return symbols, is_down


def chirp_phase(t, s, n: int, fold: bool = True):
    """Phase in cycles of an upchirp carrying ``s`` at local time ``t`` in [0, n).

    With ``fold=False`` the frequency wrap is omitted, which only matters
    off the integer sampling grid.
    """
    t = np.asarray(t, dtype=np.float64)
    s = np.asarray(s)
    chi = 0.5
    if fold:
        chi = np.where(t < n - s, 0.5, 1.5)
    return t * t / (2 * n) + (s / n - chi) * t


def gen_upchirp(params: LoraParams, s: int) -> IqSignal:
    n = params.n
    if not 0 <= s < n:
        raise ValueError(f"symbol {s} outside [0, {n})")
    return IqSignal(np.exp(2j * np.pi * chirp_phase(np.arange(n), s, n)), 1)


def gen_downchirp(params: LoraParams) -> IqSignal:
    return IqSignal(np.conj(_base_upchirp(params.n)), 1)


@lru_cache(maxsize=16)
def _base_upchirp(n: int) -> np.ndarray:
    x = np.exp(2j * np.pi * chirp_phase(np.arange(n), 0, n))
    x.setflags(write=False)
    return x


def render_frame(params: LoraParams, cfg: FrameConfig, t, extra_phase=None) -> np.ndarray:
    """Evaluate the continuous-time frame at arbitrary times ``t``.

    Samples outside ``[0, n_chirps * N)`` are zero. ``extra_phase`` (cycles,
    same shape as ``t``) is added before exponentiation, which lets callers
    fold a carrier offset into the same pass.
    """
    n = params.n
    t = np.asarray(t, dtype=np.float64)
    symbols, is_down = cfg.chirp_table(n)
    idx = np.floor(t / n).astype(np.int64)
    inside = (idx >= 0) & (idx < cfg.n_chirps)
    idx_c = np.clip(idx, 0, max(cfg.n_chirps - 1, 0))
    local = t - idx_c * n
    sym = symbols[idx_c] if cfg.n_chirps else np.zeros_like(idx_c)
    down = is_down[idx_c] if cfg.n_chirps else np.zeros_like(idx_c, dtype=bool)
    phase = chirp_phase(local, sym, n)
    phase = np.where(down, -phase, phase)
    if extra_phase is not None:
        phase = phase + extra_phase
    out = np.exp(2j * np.pi * phase)
    out[~inside] = 0
    return out


def gen_oversampled_frame(params: LoraParams, cfg: FrameConfig) -> IqSignal:
    r = params.oversample
    k = np.arange(r * params.n * cfg.n_chirps)
    return IqSignal(render_frame(params, cfg, k / r), r)
