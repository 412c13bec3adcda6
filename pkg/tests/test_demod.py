import numpy as np
import pytest
from hypothesis import given, strategies as st

from lorasync.demod import dechirp, demod_corrected, demod_symbol, phi_ramp
from lorasync.waveform import LoraParams, gen_downchirp, gen_upchirp


def test_every_symbol_demodulates_at_sf6():
    p = LoraParams(6)
    for s in range(p.n):
        r = demod_symbol(gen_upchirp(p, s))
        assert r.s_hat == s
        assert r.peak_mag == pytest.approx(p.n)


def test_downchirp_dechirps_to_dc():
    p = LoraParams(7)
    assert demod_symbol(gen_downchirp(p), "down").s_hat == 0


def test_stack_and_single_agree():
    p = LoraParams(6)
    syms = np.array([0, 5, 63, 17])
    stack = np.stack([gen_upchirp(p, int(s)).samples for s in syms])
    assert np.array_equal(demod_corrected(stack, 0.0, 0), syms)
    assert demod_corrected(stack[1], 0.0, 0) == 5


@given(st.integers(0, 255), st.integers(-64, 63), st.floats(-0.5, 0.5))
def test_corrected_demod_removes_known_offsets(s, l, phi):
    p = LoraParams(8)
    n = p.n
    k = np.arange(n)
    x = gen_upchirp(p, s).samples * np.exp(2j * np.pi * (l + phi) * k / n)
    assert demod_corrected(x, phi, l) == s


def test_phi_ramp_continues_across_chunks():
    n = 16
    r = phi_ramp(n, 0.3, np.arange(3)).reshape(-1)
    step = r[1:] / r[:-1]
    assert np.allclose(step, np.exp(-2j * np.pi * 0.3 / n))


def test_input_validation():
    with pytest.raises(ValueError):
        dechirp(np.ones(12))
    with pytest.raises(ValueError):
        dechirp(np.ones(16), "sideways")
