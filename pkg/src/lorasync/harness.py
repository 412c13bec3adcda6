"""Monte Carlo campaigns: random trials through transmitter, channel and receiver.

Every trial draws from its own generator keyed on (seed, snr index, trial
index), so results do not depend on how trials are split across workers.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np

from .channel import Impairments, add_awgn, transmit
from .demod import demod_corrected
from .dsp import DEFAULT_TAPS_PER_PHASE, design_lowpass, filter_stream
from .receiver import (FrameShape, ReceiverConfig, demodulate_payload, front_end, payload_stream,
                       run_receiver)
from .waveform import FrameConfig, IqSignal, LoraParams, chirp_phase

__all__ = [
    "MODES",
    "CSV_COLUMNS",
    "SE_COLUMNS",
    "CampaignConfig",
    "TrialOutcome",
    "SnrRow",
    "CampaignResult",
    "trial_rng",
    "run_trial",
    "run_baseline_trial",
    "run_ber_fractional_batch",
    "run_campaign",
    "write_csv",
    "format_csv",
    "snr_grid",
]

MODES = ("sync-rate", "ber", "ber-fractional", "baseline")
CSV_COLUMNS = ("snr_db", "frames", "sync_failures", "sync_fail_rate", "synced_frames",
               "bit_errors", "bits", "ber", "symbol_errors", "ser")
SE_COLUMNS = ("sync_fail_rate_se", "ber_se", "ser_se")

# Symbols per vectorised batch in ber-fractional mode; part of the RNG key.
FRACTIONAL_BATCH = 2000


@dataclass(frozen=True)
class CampaignConfig:
    mode: str = "sync-rate"
    sf: int = 8
    oversample: int = 1
    snr_db: tuple = (-12.0,)
    frames: int = 10_000
    payload_len: int = 10
    n_up: int = 8
    n_sync: int = 2
    n_down: int = 2
    scheme: str = "proposed"
    q: int = 0
    phi: float | None = None
    lam: float | None = None
    seed: int = 0
    workers: int = 1
    # CFO draws cover [-cfo_span, cfo_span - cfo_margin]; see README for the margin.
    cfo_span: float | None = None
    cfo_margin: float = 0.5
    sto_span: float | None = None
    taps_per_phase: int = DEFAULT_TAPS_PER_PHASE

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        if not self.snr_db:
            raise ValueError("need at least one SNR point")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.payload_len < 1:
            raise ValueError("payload length must be >= 1")
        if self.q % 3 or not 0 <= self.q <= self.n - 3:
            raise ValueError(f"network identifier must be a multiple of 3 in [0, {self.n - 3}]")
        LoraParams(self.sf, self.oversample)
        if self.mode == "ber-fractional":
            if (self.phi is None) == (self.lam is None):
                raise ValueError("ber-fractional needs exactly one of phi or lambda")
            off = self.phi if self.phi is not None else self.lam
            if not -0.5 <= off <= 0.5:
                raise ValueError("fractional offset must lie in [-0.5, 0.5]")
        elif self.phi is not None or self.lam is not None:
            raise ValueError("phi/lambda only apply to ber-fractional mode")
        if self.mode in ("sync-rate", "ber"):
            ReceiverConfig(self.params, self.shape, self.scheme, self.taps_per_phase)

    @property
    def n(self) -> int:
        return 1 << self.sf

    @property
    def params(self) -> LoraParams:
        return LoraParams(self.sf, self.oversample)

    @property
    def shape(self) -> FrameShape:
        return FrameShape(self.n_up, self.n_sync, self.n_down, self.q, self.payload_len)

    @property
    def cfo_range(self) -> tuple[float, float]:
        span = self.n / 4 if self.cfo_span is None else self.cfo_span
        return -span, span - self.cfo_margin

    @property
    def sto_range(self) -> float:
        return float(self.n if self.sto_span is None else self.sto_span)


@dataclass(frozen=True)
class TrialOutcome:
    sync_ok: bool
    q_ok: bool
    bit_errors: int
    symbol_errors: int
    bits_total: int
    unsynced_bits: int = 0


@dataclass
class SnrRow:
    snr_db: float
    frames: int = 0
    sync_failures: int = 0
    bit_errors: int = 0
    bits: int = 0
    symbol_errors: int = 0
    symbols: int = 0
    unsynced_bits: int = 0
    runtime_s: float = 0.0

    @property
    def synced_frames(self) -> int:
        return self.frames - self.sync_failures

    @property
    def sync_fail_rate(self) -> float:
        return self.sync_failures / self.frames if self.frames else math.nan

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else math.nan

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols if self.symbols else math.nan

    def se(self, rate: float, count: int) -> float:
        if not count or math.isnan(rate):
            return math.nan
        return math.sqrt(rate * (1 - rate) / count)

    def add(self, o: TrialOutcome, symbols: int):
        self.frames += 1
        if o.sync_ok:
            self.bit_errors += o.bit_errors
            self.bits += o.bits_total
            self.symbol_errors += o.symbol_errors
            self.symbols += symbols
        else:
            self.sync_failures += 1
            self.unsynced_bits += o.unsynced_bits


@dataclass
class CampaignResult:
    config: CampaignConfig
    rows: list = field(default_factory=list)


def trial_rng(seed: int, snr_index: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(snr_index, trial_index)))


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    out = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        out += (x & np.uint64(1)).astype(np.int64)
        x >>= np.uint64(1)
    return out


def _bit_errors(a, b) -> int:
    return int(_popcount(np.bitwise_xor(np.asarray(a, np.int64), np.asarray(b, np.int64))).sum())


def _draw(cfg: CampaignConfig, rng: np.random.Generator):
    payload = rng.integers(0, cfg.n, cfg.payload_len)
    lo, hi = cfg.cfo_range
    cfo = float(rng.uniform(lo, hi))
    return payload, cfo


def run_trial(cfg: CampaignConfig, snr_db: float, rng: np.random.Generator) -> TrialOutcome:
    """One frame through the full receiver; failures are data, never exceptions."""
    payload, cfo = _draw(cfg, rng)
    sto = float(rng.uniform(0, cfg.sto_range))
    truth = Impairments(cfo, sto, snr_db)
    frame = FrameConfig(cfg.n_up, cfg.n_sync, cfg.n_down, cfg.q, tuple(payload))
    out = transmit(cfg.params, frame, truth, rng if math.isfinite(snr_db) else None)
    rx = run_receiver(out.signal, ReceiverConfig(cfg.params, cfg.shape, cfg.scheme,
                                                 cfg.taps_per_phase))
    bits = cfg.payload_len * cfg.sf
    est = rx.estimate
    q_ok = rx.detected and est.q_hat == cfg.q
    n = cfg.n
    sto_err = (est.sto_samples - sto + n / 2) % n - n / 2
    ok = q_ok and abs(est.cfo_bins - cfo) < 0.5 and abs(sto_err) < 0.5
    if not ok:
        return TrialOutcome(False, q_ok, 0, 0, 0, bits)
    return TrialOutcome(True, True, _bit_errors(payload, rx.payload_hat),
                        int(np.count_nonzero(payload != rx.payload_hat)), bits)


def run_baseline_trial(cfg: CampaignConfig, snr_db: float,
                       rng: np.random.Generator) -> TrialOutcome:
    """Payload demodulation with the true offsets handed to the receiver.

    The delay is drawn on the oversample grid so the genie can sample the
    payload exactly at the symbol boundaries.
    """
    payload, cfo = _draw(cfg, rng)
    r = cfg.oversample
    sto = int(rng.integers(0, int(cfg.sto_range * r))) / r
    truth = Impairments(cfo, sto, snr_db)
    frame = FrameConfig(cfg.n_up, cfg.n_sync, cfg.n_down, cfg.q, tuple(payload))
    out = transmit(cfg.params, frame, truth, rng if math.isfinite(snr_db) else None)
    start = round((frame.n_preamble * cfg.n + out.guard_prefix - sto) * r)
    if r > 1:
        y = payload_stream(out.signal, cfo, cfg.n, cfg.taps_per_phase)
        s_hat = demodulate_payload(y, start, cfg.payload_len, 0.0, 0, cfg.params)
    else:
        y = front_end(out.signal, cfg.taps_per_phase)
        s_hat = demodulate_payload(y, start, cfg.payload_len, truth.phi, truth.l, cfg.params)
    return TrialOutcome(True, True, _bit_errors(payload, s_hat),
                        int(np.count_nonzero(payload != s_hat)), cfg.payload_len * cfg.sf)


def _cyclic_symbols(n: int, r: int, symbols: np.ndarray, lam: float, pad: int) -> np.ndarray:
    """Self-repeating chirps sampled at t = k/R + lam, with ``pad`` extra oversamples each side."""
    k = np.arange(-pad, n * r + pad)
    t = np.mod(k / r + lam, n)
    ph = chirp_phase(t[None, :], symbols[:, None], n)
    return np.exp(2j * np.pi * ph)


def run_ber_fractional_batch(cfg: CampaignConfig, snr_db: float, count: int,
                             rng: np.random.Generator) -> tuple[int, int]:
    """Bit and symbol errors for ``count`` isolated symbols with an uncorrected offset."""
    n = cfg.n
    symbols = rng.integers(0, n, count)
    if cfg.phi is not None:
        x = np.exp(2j * np.pi * chirp_phase(np.arange(n)[None, :], symbols[:, None], n))
        x = x * np.exp(2j * np.pi * cfg.phi * np.arange(n) / n)
        y = add_awgn(IqSignal(x, 1), snr_db, rng).samples
    else:
        r = cfg.oversample
        filt = design_lowpass(r, cfg.taps_per_phase)
        pad = filt.group_delay
        x = _cyclic_symbols(n, r, symbols, cfg.lam, pad)
        x = add_awgn(IqSignal(x, r), snr_db, rng).samples
        y = filter_stream(x, filt)[:, pad:pad + n * r:r]
    s_hat = demod_corrected(y, 0.0, 0)
    errs = symbols != s_hat
    return int(_popcount(symbols ^ s_hat).sum()), int(np.count_nonzero(errs))


# Work units: (snr index, first trial, last trial). Module-level so they pickle.
def _run_unit(args) -> SnrRow:
    cfg, si, lo, hi = args
    snr = cfg.snr_db[si]
    row = SnrRow(snr)
    if cfg.mode == "ber-fractional":
        for b in range(lo, hi):
            first = b * FRACTIONAL_BATCH
            count = min(FRACTIONAL_BATCH, cfg.frames - first)
            be, se = run_ber_fractional_batch(cfg, snr, count, trial_rng(cfg.seed, si, b))
            row.frames += count
            row.bit_errors += be
            row.bits += count * cfg.sf
            row.symbol_errors += se
            row.symbols += count
        return row
    trial = run_baseline_trial if cfg.mode == "baseline" else run_trial
    for t in range(lo, hi):
        row.add(trial(cfg, snr, trial_rng(cfg.seed, si, t)), cfg.payload_len)
    return row


def _merge(into: SnrRow, part: SnrRow):
    for f in ("frames", "sync_failures", "bit_errors", "bits", "symbol_errors", "symbols",
              "unsynced_bits"):
        setattr(into, f, getattr(into, f) + getattr(part, f))


def _units(cfg: CampaignConfig, si: int) -> list:
    if cfg.mode == "ber-fractional":
        total = -(-cfg.frames // FRACTIONAL_BATCH)
    else:
        total = cfg.frames
    per = max(1, -(-total // (cfg.workers * 4)))
    return [(cfg, si, lo, min(lo + per, total)) for lo in range(0, total, per)]


def run_campaign(cfg: CampaignConfig, out: str | os.PathLike | None = None,
                 with_se: bool = False, progress=None) -> CampaignResult:
    result = CampaignResult(cfg)
    pool = get_context("fork").Pool(cfg.workers) if cfg.workers > 1 else None
    try:
        for si, snr in enumerate(cfg.snr_db):
            t0 = time.perf_counter()
            units = _units(cfg, si)
            parts = pool.map(_run_unit, units) if pool else [_run_unit(u) for u in units]
            row = SnrRow(snr)
            for p in parts:
                _merge(row, p)
            row.runtime_s = time.perf_counter() - t0
            result.rows.append(row)
            if progress:
                progress(row)
    finally:
        if pool:
            pool.close()
            pool.join()
    if out is not None:
        write_csv(result, out, with_se)
    return result


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def format_csv(result: CampaignResult, with_se: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS + (SE_COLUMNS if with_se else ()))
    for r in result.rows:
        vals = [r.snr_db, r.frames, r.sync_failures, r.sync_fail_rate, r.synced_frames,
                r.bit_errors, r.bits, r.ber, r.symbol_errors, r.ser]
        if with_se:
            vals += [r.se(r.sync_fail_rate, r.frames), r.se(r.ber, r.bits),
                     r.se(r.ser, r.symbols)]
        w.writerow([_fmt(v) for v in vals])
    return buf.getvalue()


def write_csv(result: CampaignResult, path: str | os.PathLike, with_se: bool = False):
    text = format_csv(result, with_se)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {os.fspath(path)!r}: {exc.strerror}") from exc


def snr_grid(spec: str) -> tuple:
    """Parse ``START:STOP:STEP`` (inclusive) or a comma-separated list."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected START:STOP:STEP, got {spec!r}")
        start, stop, step = (float(p) for p in parts)
        if step == 0 or (stop - start) / step < 0:
            raise ValueError(f"empty or unbounded SNR range {spec!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 10) for i in range(count))
    vals = tuple(float(p) for p in spec.split(",") if p.strip())
    if not vals:
        raise ValueError("empty SNR list")
    return vals
