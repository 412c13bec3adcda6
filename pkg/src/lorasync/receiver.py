"""Full receive chain: front-end, preamble search, offset estimation, retiming, payload.

The receiver works on a buffered stream but only ever looks at chunks up to
the end of the expected payload, so the processing order is the one a
streaming implementation would follow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import sync
from .channel import apply_cfo, decompose
from .demod import demod_corrected, dechirp, phi_ramp
from .dsp import DEFAULT_TAPS_PER_PHASE, design_lowpass, dft, filter_stream
from .waveform import IqSignal, LoraParams, _base_upchirp

__all__ = [
    "FrameShape",
    "ReceiverConfig",
    "ReceiverOutput",
    "StreamCursor",
    "ChunkRoles",
    "front_end",
    "locate_clean_chunks",
    "demodulate_payload",
    "payload_stream",
    "run_receiver",
    "search_statistic",
]

SCHEMES = ("naive", "proposed")


@dataclass(frozen=True)
class FrameShape:
    n_up: int = 8
    n_sync: int = 2
    n_down: int = 2
    q: int = 0
    payload_len: int = 10

    @property
    def n_preamble(self) -> int:
        return self.n_up + self.n_sync + self.n_down


@dataclass(frozen=True)
class ReceiverConfig:
    params: LoraParams
    shape: FrameShape = FrameShape()
    scheme: str = "proposed"
    taps_per_phase: int = DEFAULT_TAPS_PER_PHASE
    # With R > 1, mix out the first-pass CFO estimate ahead of the
    # anti-alias filter and synchronise again. Without it the filter clips
    # the part of each chirp pushed past B/2 by the offset (up to a quarter
    # of its energy at |CFO| = B/4).
    afc: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.shape.n_up < 6:
            raise ValueError("need at least 6 upchirps (5 for detection plus averaging)")


@dataclass(frozen=True)
class StreamCursor:
    """Position in the oversampled stream as (rate-B index, decimation phase)."""

    index: int
    phase: int

    @classmethod
    def from_absolute(cls, a: int, r: int) -> "StreamCursor":
        return cls(a // r, a % r)

    def absolute(self, r: int) -> int:
        return self.index * r + self.phase


@dataclass
class ReceiverOutput:
    detected: bool
    estimate: sync.OffsetEstimate = field(default_factory=sync.OffsetEstimate)
    payload_hat: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ChunkRoles:
    up: tuple
    sync: tuple
    down: tuple


def locate_clean_chunks(anchor: int, m_positive: bool, shape: FrameShape) -> ChunkRoles:
    """Chunk indices wholly inside the upchirp, sync-word and downchirp regions.

    ``anchor`` is the chunk that starts M samples into the first upchirp.
    With M > 0 every region boundary falls inside a chunk, so each region of
    k chirps holds k - 1 clean chunks; with M = 0 all k are clean. The
    upchirp set is the last ceil(n_up/2) - 1 complete upchirp chunks.
    """
    if m_positive and (shape.n_sync < 2 or shape.n_down < 2):
        raise ValueError("need at least 2 sync words and 2 downchirps when M > 0")
    loss = 1 if m_positive else 0
    up_end = anchor + shape.n_up - loss
    n_avg = max(1, math.ceil(shape.n_up / 2) - 1)
    up = tuple(range(up_end - n_avg, up_end))
    s0 = anchor + shape.n_up
    sync_chunks = tuple(range(s0, s0 + shape.n_sync - loss))
    d0 = s0 + shape.n_sync
    down = tuple(range(d0, d0 + shape.n_down - loss))
    return ChunkRoles(up, sync_chunks, down)


def front_end(raw: IqSignal, taps_per_phase: int = DEFAULT_TAPS_PER_PHASE) -> np.ndarray:
    """Anti-alias low-pass at the oversampled rate; decimation is done by slicing."""
    return filter_stream(raw.samples, design_lowpass(raw.rate_mult, taps_per_phase))


def payload_stream(raw: IqSignal, cfo_bins: float, n: int,
                   taps_per_phase: int = DEFAULT_TAPS_PER_PHASE) -> np.ndarray:
    """Front-end output with a known CFO mixed out before filtering."""
    return front_end(apply_cfo(raw, -cfo_bins, n), taps_per_phase)


def _gather(y: np.ndarray, start: int, count: int, n: int, r: int) -> np.ndarray | None:
    """``count`` consecutive rate-B chunks beginning at oversample index ``start``."""
    stop = start + (count * n - 1) * r
    if start < 0 or stop >= len(y):
        return None
    return y[start:stop + 1:r].reshape(count, n)


def demodulate_payload(y: np.ndarray, start: int, count: int, phi_hat: float, l_hat: int,
                       params: LoraParams) -> np.ndarray | None:
    chunks = _gather(y, start, count, params.n, params.oversample)
    if chunks is None:
        return None
    return np.atleast_1d(demod_corrected(chunks, phi_hat, l_hat)).astype(np.int64)


def _estimate_l(scheme: str, s_up: int, s_down: int, nu: int, nu_star: int, n: int) -> int:
    if scheme == "naive":
        return sync.estimate_l_naive(s_up, s_down, n)
    return sync.estimate_l_corrected(s_up, s_down, nu, nu_star, n)


def search_statistic(dech: np.ndarray) -> np.ndarray:
    """Per-chunk coarse tone position used only for preamble search.

    Energy of bin pairs (k, k+1), accumulated over the chunk and its
    successor. Pairing keeps a tone that falls between two bins from losing
    up to 4 dB; accumulating over two chunks adds non-coherent gain. Both
    are harmless for the preamble, whose chunks all carry the same tone.
    """
    p = np.abs(dft(dech)) ** 2
    p = p + np.roll(p, -1, axis=-1)
    p[:-1] += p[1:]
    return np.argmax(p, axis=-1)


def _peak3(mag: np.ndarray, k: int) -> np.ndarray:
    """Per-chunk maximum over bins k-1, k, k+1 of a (chunks, n) magnitude array."""
    n = mag.shape[-1]
    return mag[:, [(k - 1) % n, k % n, (k + 1) % n]].max(axis=1)


def _overlaps(starts: np.ndarray, length: int, nch: int, n: int) -> np.ndarray:
    """Samples shared by each chunk and each region [start, start + length): shape (starts, nch)."""
    lo = np.arange(nch) * n
    s = np.asarray(starts)[:, None]
    return np.clip(np.minimum(lo + n, s + length) - np.maximum(lo, s), 0, None)


def _template_scores(frame_starts, up_mag, dn_mag, tones, shape: FrameShape, n: int) -> np.ndarray:
    """Preamble template match: tone energy in each chunk weighted by its overlap with each region.

    ``tones`` holds one (upchirp bin, downchirp bin) pair per frame start.
    """
    f = np.asarray(frame_starts)
    nch = len(up_mag)
    ov_up = _overlaps(f, shape.n_up * n, nch, n)
    ov_sync = _overlaps(f + shape.n_up * n, shape.n_sync * n, nch, n)
    ov_dn = _overlaps(f + (shape.n_up + shape.n_sync) * n, shape.n_down * n, nch, n)
    peaks: dict = {}

    def peak(mag, k):
        key = (id(mag), k % n)
        if key not in peaks:
            peaks[key] = _peak3(mag, k)
        return peaks[key]

    score = np.empty(len(f))
    for i, (u, d) in enumerate(tones):
        score[i] = (ov_up[i] @ peak(up_mag, u) + ov_sync[i] @ peak(up_mag, u + shape.q)
                    + ov_dn[i] @ peak(dn_mag, d))
    return score


def _phi_from(dech: np.ndarray, first: int, pairs: int) -> float:
    """Average of pairwise estimates over chunks first .. first + pairs."""
    return sync.average_phi(
        [sync.estimate_phi_pair(dech[first + i], dech[first + i + 1]) for i in range(pairs)])


@dataclass
class _Preamble:
    est: sync.OffsetEstimate
    q_ok: bool
    roles: ChunkRoles


def _estimate_offsets(chunks, dech, anchor, m_positive, phi_hat, cfg) -> _Preamble | None:
    n = cfg.params.n
    roles = locate_clean_chunks(anchor, m_positive, cfg.shape)
    used = roles.up + roles.sync + roles.down
    if min(used) < 0 or max(used) >= len(chunks):
        return None
    est = sync.OffsetEstimate(phi_hat=phi_hat)

    up_spec = sync.coherent_average(dech[list(roles.up)], phi_hat, roles.up[0])
    acc = sync.UpchirpAccumulator.from_spectrum(up_spec, len(roles.up))
    est.s_up = acc.s_up
    est.nu = sync.side_bin_sign(up_spec, acc.s_up)

    sync_spec = sync.coherent_average(dech[list(roles.sync)], phi_hat, roles.sync[0])
    s_sync = int(np.argmax(np.abs(sync_spec)))
    est.q_hat = sync.estimate_q(s_sync, est.s_up, n)

    down_chunks = chunks[list(roles.down)] * _base_upchirp(n)
    down_spec = sync.coherent_average(down_chunks, phi_hat, roles.down[0])
    est.s_down = int(np.argmax(np.abs(down_spec)))
    est.nu_star = sync.side_bin_sign(down_spec, est.s_down)
    est.l_hat = _estimate_l(cfg.scheme, est.s_up, est.s_down, est.nu, est.nu_star, n)
    est.m_hat = sync.estimate_m(est.s_up, est.l_hat, n)
    est.lambda_hat = sync.estimate_lambda(acc, est.m_hat, n)
    return _Preamble(est, est.q_hat == cfg.shape.q, roles)


def _synchronise(raw: IqSignal, cfg: ReceiverConfig) -> ReceiverOutput:
    params, shape = cfg.params, cfg.shape
    n, r = params.n, params.oversample
    if raw.rate_mult != r:
        raise ValueError(f"stream rate {raw.rate_mult} does not match oversample {r}")
    y = front_end(raw, cfg.taps_per_phase)
    diag: dict = {}

    # SEARCH: consecutive chunks at decimation phase 0
    d0 = y[::r]
    nch = len(d0) // n
    chunks = d0[:nch * n].reshape(nch, n)
    dech = dechirp(chunks, "up")
    coarse = search_statistic(dech)
    live = np.abs(chunks).max(axis=1) > 1e-12  # silent chunks carry no decision
    p = next((i for i in range(nch - 4)
              if live[i:i + 5].all() and sync.detect_preamble(coarse[i:i + 5], n)), None)
    if p is None:
        diag["reason"] = "no preamble"
        return ReceiverOutput(False, diagnostics=diag)
    diag["p"] = p

    half = shape.n_up // 2
    if p + shape.n_preamble + 3 > nch:
        diag["reason"] = "stream exhausted"
        return ReceiverOutput(False, diagnostics=diag)

    # PHI: provisional estimate from chunks safely inside the detected run
    # (the search statistic can fire one chunk before the first upchirp)
    phi_hat = _phi_from(dech, p + 2, half)

    # ALIGN: the upchirp tone is known from a coherent average; each chunk
    # that may hold a full downchirp proposes (L, M) and hence frame starts,
    # which are ranked by a template match over the whole preamble.
    up_mag = np.abs(dft(dech))
    dn_mag = np.abs(dft(chunks * _base_upchirp(n) * phi_ramp(n, phi_hat, np.arange(nch))))
    u = int(np.argmax(np.abs(sync.coherent_average(dech[p + 2:p + 2 + half], phi_hat, p + 2))))
    pre_len = (shape.n_up + shape.n_sync) * n
    cands = {}
    for c in range(p + 1, min(nch, p + shape.n_preamble + 3)):
        d = int(np.argmax(dn_mag[c]))
        m_c = sync.estimate_m(u, sync.estimate_l_naive(u, d, n), n)
        for c2 in range(c - shape.n_down, c + 2):
            cands.setdefault(c2 * n - m_c - pre_len, (u, d))
    starts = list(cands)
    scores = _template_scores(starts, up_mag, dn_mag, [cands[f] for f in starts], shape, n)
    frame_start = starts[int(np.argmax(scores))]
    m = (-frame_start) % n

    # SUP / SYNC / DOWN, then re-anchor with the refined offsets; a second
    # pass only runs if that moved the chunk roles.
    pre = None
    for _ in range(2):
        anchor = (frame_start + m) // n
        if anchor >= 0:
            phi_hat = _phi_from(dech, anchor, half)
        try:
            pre = _estimate_offsets(chunks, dech, anchor, m > 0, phi_hat, cfg)
        except ValueError as exc:
            diag["reason"] = str(exc)
            return ReceiverOutput(False, diagnostics=diag)
        if pre is None:
            diag["reason"] = "stream exhausted"
            return ReceiverOutput(False, diagnostics=diag)
        est = pre.est
        diag["estimated"] = True
        tones = (est.s_up, (est.l_hat - est.m_hat) % n)
        base = anchor * n - est.m_hat
        starts = (base - n, base, base + n)
        scores = _template_scores(starts, up_mag, dn_mag, [tones] * 3, shape, n)
        refined = starts[int(np.argmax(scores))]
        diag["template_score"] = float(scores.max())
        moved = (refined + est.m_hat) // n != anchor or (est.m_hat > 0) != (m > 0)
        frame_start, m = refined, est.m_hat
        if not moved or not pre.q_ok:
            break
    diag["anchor"] = anchor
    est = pre.est
    if not pre.q_ok:
        diag["reason"] = "wrong network"
        return ReceiverOutput(False, est, diagnostics=diag)

    # REALIGN: skip to the payload boundary, then move the sampling instant by -lambda
    start = (frame_start + shape.n_preamble * n) * r
    if r > 1:
        start -= math.floor(est.lambda_hat * r + 0.5)
    cursor = StreamCursor.from_absolute(start, r)
    diag["cursor"] = cursor
    diag["polyphase"] = cursor.phase

    # PAYLOAD
    payload = demodulate_payload(y, start, shape.payload_len, phi_hat, est.l_hat, params)
    if payload is None:
        diag["reason"] = "stream exhausted"
        return ReceiverOutput(False, est, diagnostics=diag)
    diag["chunks_consumed"] = -(-(start + shape.payload_len * n * r) // (n * r))
    return ReceiverOutput(True, est, payload, diag)


def acquisition_offsets(n: int) -> tuple:
    """CFO hypotheses (bins) for the first pass; the best template match among them wins."""
    return (0.0, -n / 8, n / 8)


def run_receiver(raw: IqSignal, cfg: ReceiverConfig) -> ReceiverOutput:
    """Detect, synchronise and demodulate one frame from an oversampled stream."""
    n, r = cfg.params.n, cfg.params.oversample
    if raw.rate_mult != r:
        raise ValueError(f"stream rate {raw.rate_mult} does not match oversample {r}")
    if not (cfg.afc and r > 1):
        return _synchronise(raw, cfg)
    best = None
    for shift in acquisition_offsets(n):
        trial = _synchronise(apply_cfo(raw, -shift, n), cfg)
        d = trial.diagnostics
        if d.get("estimated") and d.get("reason") is None:
            if best is None or d["template_score"] > best[1].diagnostics["template_score"]:
                best = (shift, trial)
    if best is None:
        return trial
    shift, first = best
    # Up and down tones only pin the CFO modulo n/2; fold back into the unambiguous span.
    coarse = (shift + first.estimate.cfo_bins + n / 4 + 0.5) % (n / 2) - n / 4 - 0.5
    out = _synchronise(apply_cfo(raw, -coarse, n), cfg)
    est = out.estimate
    est.l_hat, est.phi_hat = decompose(coarse + est.cfo_bins)
    out.diagnostics["coarse_cfo"] = coarse
    return out
