import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lorasync.harness import (CSV_COLUMNS, SE_COLUMNS, CampaignConfig, SnrRow, TrialOutcome,
                              _popcount, format_csv, run_baseline_trial, run_campaign,
                              run_trial, snr_grid, trial_rng, write_csv)


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


@given(st.lists(st.integers(0, 2**40), min_size=1, max_size=20))
def test_popcount_oracle(xs):
    assert list(_popcount(np.array(xs))) == [bin(x).count("1") for x in xs]


def test_snr_grid_forms():
    assert snr_grid("-14:-5:1") == tuple(float(x) for x in range(-14, -4))
    assert snr_grid("-12, -10,-8") == (-12.0, -10.0, -8.0)
    assert snr_grid("0:1:0.25") == (0.0, 0.25, 0.5, 0.75, 1.0)
    assert snr_grid("5:1:-2") == (5.0, 3.0, 1.0)
    for bad in ("1:2", "1:0:1", "0:1:0", "", "a,b"):
        with pytest.raises(ValueError):
            snr_grid(bad)


@given(st.integers(-30, 10), st.integers(0, 20), st.integers(1, 4))
def test_snr_grid_is_inclusive(start, span, step):
    grid = snr_grid(f"{start}:{start + span}:{step}")
    assert grid[0] == start and len(grid) == span // step + 1


def test_csv_header_and_se_columns():
    cfg = CampaignConfig(mode="baseline", snr_db=(-12.0, 0.0), frames=20)
    res = run_campaign(cfg)
    rows = _rows(format_csv(res))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 3
    rows_se = _rows(format_csv(res, with_se=True))
    assert tuple(rows_se[0]) == CSV_COLUMNS + SE_COLUMNS
    assert all(len(r) == len(CSV_COLUMNS) + len(SE_COLUMNS) for r in rows_se)
    assert "runtime" not in ",".join(rows[0])


@pytest.mark.parametrize("mode,extra", [
    ("sync-rate", dict(oversample=2)),
    ("ber", dict(oversample=1)),
    ("baseline", dict(oversample=4)),
    ("ber-fractional", dict(oversample=4, lam=0.3, frames=4500)),
])
def test_csv_identical_for_any_worker_count(mode, extra):
    kw = dict(mode=mode, snr_db=(-12.0, -9.0), frames=24, seed=3)
    kw.update(extra)
    texts = {format_csv(run_campaign(CampaignConfig(workers=w, **kw))) for w in (1, 2, 3)}
    assert len(texts) == 1


def test_seed_changes_results():
    kw = dict(mode="baseline", snr_db=(-14.0,), frames=200)
    a = format_csv(run_campaign(CampaignConfig(seed=1, **kw)))
    b = format_csv(run_campaign(CampaignConfig(seed=2, **kw)))
    assert a != b


def test_noiseless_trials_are_error_free():
    for r in (1, 4):
        cfg = CampaignConfig(mode="ber", oversample=r, snr_db=(math.inf,))
        for t in range(5):
            out = run_trial(cfg, math.inf, trial_rng(0, 0, t))
            assert out.sync_ok and out.bit_errors == 0
            out = run_baseline_trial(cfg, math.inf, trial_rng(0, 0, t))
            assert out.bit_errors == 0


def test_row_accounting():
    row = SnrRow(-10.0)
    row.add(TrialOutcome(True, True, 3, 1, 80), 10)
    row.add(TrialOutcome(False, False, 0, 0, 80), 10)
    assert (row.frames, row.sync_failures, row.synced_frames) == (2, 1, 1)
    assert row.ber == 3 / 80 and row.ser == 0.1 and row.sync_fail_rate == 0.5
    assert math.isnan(SnrRow(0.0).ber)
    assert row.se(0.5, 100) == pytest.approx(0.05)


def test_fractional_mode_counts_symbols():
    res = run_campaign(CampaignConfig(mode="ber-fractional", phi=0.5, snr_db=(-5.0,),
                                      frames=2500))
    row = res.rows[0]
    assert row.frames == row.symbols == 2500 and row.bits == 2500 * 8
    assert 0.05 < row.ber < 0.25


@pytest.mark.parametrize("kw", [
    dict(mode="bogus"),
    dict(frames=0),
    dict(snr_db=()),
    dict(workers=0),
    dict(q=4),
    dict(sf=1),
    dict(oversample=0),
    dict(mode="ber-fractional"),
    dict(mode="ber-fractional", phi=0.1, lam=0.1),
    dict(mode="ber-fractional", phi=0.7),
    dict(phi=0.1),
    dict(scheme="other"),
    dict(n_up=4),
])
def test_config_errors(kw):
    with pytest.raises(ValueError):
        CampaignConfig(**kw)


def test_cfo_draw_range():
    cfg = CampaignConfig()
    assert cfg.cfo_range == (-64.0, 63.5)
    assert cfg.sto_range == 256.0


def test_write_csv_reports_bad_path(tmp_path):
    res = run_campaign(CampaignConfig(mode="baseline", frames=2))
    write_csv(res, tmp_path / "ok.csv")
    assert (tmp_path / "ok.csv").read_text().startswith("snr_db,")
    with pytest.raises(OSError, match="cannot write"):
        write_csv(res, tmp_path / "missing" / "x.csv")
