import numpy as np
import pytest
from hypothesis import given, strategies as st

from lorasync.channel import Impairments, transmit
from lorasync.receiver import (FrameShape, ReceiverConfig, StreamCursor, acquisition_offsets,
                               locate_clean_chunks, run_receiver)
from lorasync.waveform import FrameConfig, IqSignal, LoraParams


def _run(p, cfo, sto, payload, scheme="proposed", q=0, rx_q=None, snr=np.inf, rng=None):
    frame = FrameConfig(8, 2, 2, q, tuple(int(s) for s in payload))
    out = transmit(p, frame, Impairments(cfo, sto, snr), rng)
    shape = FrameShape(q=q if rx_q is None else rx_q, payload_len=len(payload))
    return run_receiver(out.signal, ReceiverConfig(p, shape, scheme)), out


def _sto_error(est, sto, n):
    return (est.sto_samples - sto + n / 2) % n - n / 2


@pytest.mark.parametrize("scheme", ["naive", "proposed"])
def test_exhaustive_integer_offsets_sf6_end_to_end(scheme):
    p = LoraParams(6)
    n = p.n
    rng = np.random.default_rng(3)
    for l in range(-n // 4, n // 4):
        for m in range(n):
            payload = rng.integers(0, n, 4)
            rx, _ = _run(p, float(l), float(m), payload, scheme)
            assert rx.detected, (l, m)
            assert (rx.estimate.l_hat, rx.estimate.m_hat) == (l, m)
            assert np.array_equal(rx.payload_hat, payload)


def test_random_noiseless_frames_r4_are_exact():
    p = LoraParams(8, 4)
    n = p.n
    rng = np.random.default_rng(11)
    for _ in range(500):
        payload = rng.integers(0, n, 10)
        cfo = rng.uniform(-n / 4, n / 4 - 0.5)
        sto = rng.uniform(0, n)
        rx, _ = _run(p, cfo, sto, payload)
        assert rx.detected
        assert np.array_equal(rx.payload_hat, payload)
        assert abs(rx.estimate.cfo_bins - cfo) < 0.01
        assert abs(_sto_error(rx.estimate, sto, n)) < 0.01


def test_joint_fractional_recovery_grid():
    p = LoraParams(8, 4)
    n = p.n
    rng = np.random.default_rng(5)
    grid = np.linspace(-0.5, 0.5, 21)
    worst_cfo = worst_sto = 0.0
    for phi in grid:
        for lam in grid:
            l = int(rng.integers(-n // 4 + 1, n // 4 - 1))
            m = int(rng.integers(1, n))
            payload = rng.integers(0, n, 10)
            rx, _ = _run(p, l + phi, m + lam, payload)
            assert rx.detected, (phi, lam)
            assert np.array_equal(rx.payload_hat, payload), (phi, lam)
            worst_cfo = max(worst_cfo, abs(rx.estimate.cfo_bins - (l + phi)))
            worst_sto = max(worst_sto, abs(_sto_error(rx.estimate, m + lam, n)))
    assert worst_cfo < 0.01
    assert worst_sto < 0.01


@pytest.mark.parametrize("r", [2, 4, 8])
def test_retiming_residual_bounded_by_half_oversample(r):
    p = LoraParams(8, r)
    n = p.n
    rng = np.random.default_rng(r)
    for _ in range(60):
        cfo = rng.uniform(-n / 4, n / 4 - 0.5)
        sto = rng.uniform(0, n)
        rx, out = _run(p, cfo, sto, rng.integers(0, n, 4))
        assert rx.detected
        cursor = rx.diagnostics["cursor"]
        assert cursor.phase == rx.diagnostics["polyphase"]
        ideal = out.guard_prefix + 12 * n - sto
        assert abs(cursor.absolute(r) / r - ideal) <= 1 / (2 * r) + 0.02


def test_wrong_network_is_not_detected():
    p = LoraParams(8, 1)
    rx, _ = _run(p, 10.2, 40.3, [1, 2, 3], q=9, rx_q=0)
    assert not rx.detected
    assert rx.diagnostics["reason"] == "wrong network"
    assert rx.estimate.q_hat == 9


def test_nonzero_network_id_roundtrip():
    p = LoraParams(8, 2)
    rx, _ = _run(p, -20.7, 100.2, [9, 8, 7], q=126)
    assert rx.detected and rx.estimate.q_hat == 126
    assert list(rx.payload_hat) == [9, 8, 7]


def test_noise_only_stream_finds_nothing():
    rng = np.random.default_rng(0)
    x = (rng.standard_normal(256 * 40) + 1j * rng.standard_normal(256 * 40)) * 3
    rx = run_receiver(IqSignal(x, 1), ReceiverConfig(LoraParams(8)))
    assert not rx.detected
    assert rx.diagnostics["reason"] == "no preamble"


def test_high_snr_frames_decode():
    p = LoraParams(8, 4)
    rng = np.random.default_rng(1)
    for _ in range(20):
        payload = rng.integers(0, 256, 10)
        rx, _ = _run(p, rng.uniform(-64, 63.5), rng.uniform(0, 256), payload, snr=0.0, rng=rng)
        assert rx.detected and np.array_equal(rx.payload_hat, payload)


def test_rate_mismatch_rejected():
    with pytest.raises(ValueError):
        run_receiver(IqSignal(np.zeros(4096, complex), 2), ReceiverConfig(LoraParams(8, 4)))


def test_config_validation():
    with pytest.raises(ValueError):
        ReceiverConfig(LoraParams(8), scheme="fancy")
    with pytest.raises(ValueError):
        ReceiverConfig(LoraParams(8), FrameShape(n_up=5))


def test_clean_chunk_roles():
    shape = FrameShape()
    aligned = locate_clean_chunks(10, False, shape)
    assert aligned.up == (15, 16, 17) and aligned.sync == (18, 19) and aligned.down == (20, 21)
    offset = locate_clean_chunks(10, True, shape)
    assert offset.up == (14, 15, 16) and offset.sync == (18,) and offset.down == (20,)
    with pytest.raises(ValueError):
        locate_clean_chunks(0, True, FrameShape(n_sync=1))


@given(st.integers(0, 10**7), st.sampled_from([1, 2, 4, 8]))
def test_stream_cursor_roundtrip(a, r):
    c = StreamCursor.from_absolute(a, r)
    assert 0 <= c.phase < r and c.absolute(r) == a


def test_acquisition_hypotheses_include_zero():
    assert acquisition_offsets(256)[0] == 0
