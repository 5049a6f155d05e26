import math

import numpy as np
import pytest

from spinquench.checkpoint import load_checkpoint
from spinquench.errors import ConfigError
from spinquench.harness import (
    PROFILES,
    AggregateCurve,
    PeakSeries,
    aggregate_reference,
    extract_peaks,
    git_blob_sha1,
    read_aggregate_curve,
    read_table,
    run_itebd,
    run_mc,
    sample_one,
    shift_correction,
    write_peaks,
    write_table,
)
from spinquench.itebd import QuenchConfig, expect_sz
from spinquench.window import build_hloc


@pytest.fixture(scope="module")
def short_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("short_run")
    config = QuenchConfig(delta=0.5, dt=0.0625, k_max=16, t_init=1.0)
    chk = base / "state.mpsc1"
    curve = base / "curve.csv"
    rc = run_itebd(config, chk, curve)
    assert rc == 0
    return {"config": config, "checkpoint": chk, "curve": curve}


def test_run_itebd_curve_layout(short_run):
    meta, cols = read_table(short_run["curve"])
    assert list(cols) == ["t", "sz0", "sz1", "discarded_weight", "entropy_A", "entropy_B"]
    assert cols["t"][0] == 0.0
    assert cols["sz0"][0] == 0.5
    assert cols["sz1"][0] == -0.5
    assert cols["t"].size == 17  # t=0 plus 16 steps of dt=1/16
    assert np.allclose(np.diff(cols["t"]), 0.0625)
    assert meta["delta"] == 0.5
    assert meta["k_max"] == 16
    assert meta["checkpoint"] == git_blob_sha1(short_run["checkpoint"])
    # staggered moment decays but stays positive this early
    assert 0.0 < cols["sz0"][-1] < 0.5
    assert np.all(cols["entropy_A"][1:] > 0.0)


def test_run_itebd_checkpoint_matches_curve_tail(short_run):
    state, config = load_checkpoint(short_run["checkpoint"])
    _meta, cols = read_table(short_run["curve"])
    assert state.time == pytest.approx(1.0)
    assert expect_sz(state, "A") == pytest.approx(cols["sz0"][-1], abs=1e-12)
    assert config.k_max == 16


def test_write_read_table_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    meta = {"b": 2, "a": [1, 2], "name": "x"}
    rows = [("1.5", "-0.25"), ("2.5", "0.125")]
    write_table(path, meta, ("t", "v"), rows)
    text = path.read_text()
    assert text.startswith('# {"a":[1,2],"b":2,"name":"x"}\n')
    assert text.endswith("\n")
    meta_back, cols = read_table(path)
    assert meta_back == {"a": [1, 2], "b": 2, "name": "x"}
    assert np.array_equal(cols["t"], [1.5, 2.5])
    assert np.array_equal(cols["v"], [-0.25, 0.125])


def test_run_mc_identical_across_worker_counts(short_run, tmp_path):
    out1 = tmp_path / "w1.csv"
    out2 = tmp_path / "w2.csv"
    kw = dict(
        checkpoint=short_run["checkpoint"],
        l=2,
        t_fin=1.0 + 2.0 / 3.0,
        delta_t=1.0 / 3.0,
        n_max=20,
        n_samples=60,
        master_seed=7,
    )
    run_mc(n_workers=1, out=out1, **kw)
    run_mc(n_workers=2, out=out2, **kw)
    assert out1.read_bytes() == out2.read_bytes()


def test_run_mc_aggregate_matches_two_pass(short_run):
    state, config = load_checkpoint(short_run["checkpoint"])
    h = build_hloc(2, config.delta)
    t_fin = 1.0 + 2.0 / 3.0
    rows = []
    for sid in range(40):
        rec = sample_one(state, h, 2, t_fin, 1.0 / 3.0, 20, 7, sid)
        rows.append([v for _t, v in rec.series])
    mean_ref, stderr_ref = aggregate_reference(rows)
    curve = run_mc(
        checkpoint=short_run["checkpoint"],
        l=2,
        t_fin=t_fin,
        delta_t=1.0 / 3.0,
        n_max=20,
        n_samples=40,
        master_seed=7,
        n_workers=1,
    )
    assert np.max(np.abs(curve.mean - mean_ref)) < 1e-12
    assert np.max(np.abs(curve.stderr - stderr_ref)) < 1e-12
    assert curve.n_samples == 40
    assert np.allclose(curve.times, state.time + np.arange(3) / 3.0)


def test_run_mc_single_sample_has_nan_stderr(short_run, tmp_path):
    out = tmp_path / "one.csv"
    curve = run_mc(
        checkpoint=short_run["checkpoint"],
        l=1,
        t_fin=1.0 + 1.0 / 3.0,
        delta_t=1.0 / 3.0,
        n_max=20,
        n_samples=1,
        master_seed=0,
        n_workers=1,
        out=out,
    )
    assert np.all(np.isnan(curve.stderr))
    _meta, back = read_aggregate_curve(out)
    assert np.all(np.isnan(back.stderr))
    assert np.array_equal(back.mean, curve.mean)


def test_run_mc_validation(short_run):
    common = dict(
        checkpoint=short_run["checkpoint"],
        delta_t=1.0 / 3.0,
        n_max=20,
        n_samples=2,
        master_seed=0,
    )
    with pytest.raises(ConfigError):
        run_mc(l=2, t_fin=0.5, n_workers=1, **common)  # before checkpoint time
    with pytest.raises(ConfigError):
        run_mc(l=2, t_fin=2.0, n_workers=0, **common)
    with pytest.raises(ConfigError):
        run_mc(l=2, t_fin=1.5, n_workers=1, **common)  # non-integral steps
    with pytest.raises(ConfigError):
        run_mc(l=2, t_fin=2.0, n_workers=1, expected_delta=1.0, **common)


def test_run_mc_warns_outside_horizon(short_run):
    with pytest.warns(UserWarning):
        run_mc(
            checkpoint=short_run["checkpoint"],
            l=1,
            t_fin=4.0,
            delta_t=1.0,
            n_max=20,
            n_samples=2,
            master_seed=0,
            n_workers=1,
        )


def test_mc_agrees_with_direct_evolution_within_errors(short_run, tmp_path):
    # l=3 windows from the t=1 checkpoint, continued to t=2, against the
    # k=16 chain evolved directly; all grid points inside the horizon
    config = QuenchConfig(delta=0.5, dt=0.0625, k_max=16, t_init=2.0)
    chk2 = tmp_path / "t2.mpsc1"
    curve2 = tmp_path / "t2.csv"
    run_itebd(config, chk2, curve2)
    _meta, cols = read_table(curve2)
    direct = {round(float(t), 10): v for t, v in zip(cols["t"], cols["sz0"])}
    curve = run_mc(
        checkpoint=short_run["checkpoint"],
        l=3,
        t_fin=2.0,
        delta_t=0.25,
        n_max=20,
        n_samples=2000,
        master_seed=5,
        n_workers=4,
    )
    pulls = []
    for t, m, s in zip(curve.times, curve.mean, curve.stderr):
        key = round(float(t), 10)
        assert key in direct
        if s > 0:
            pulls.append(abs(m - direct[key]) / s)
    assert max(pulls) < 3.0


def test_extract_peaks_on_analytic_curve():
    t = np.linspace(0.0, 7.0, 701)
    curve = AggregateCurve(
        times=t,
        mean=0.5 * np.cos(t),
        stderr=np.full(t.size, 1e-3),
        n_samples=100,
    )
    peaks = extract_peaks(curve)
    assert len(peaks.peaks) == 2
    for (t_peak, height, stderr), expect_t in zip(peaks.peaks, (math.pi, 2 * math.pi)):
        assert t_peak == pytest.approx(expect_t, abs=0.011)
        assert height == pytest.approx(0.5, abs=1e-4)
        assert stderr == pytest.approx(1e-3)


def test_extract_peaks_monotone_curve_is_empty():
    t = np.linspace(0.0, 1.0, 30)
    curve = AggregateCurve(t, np.exp(-t), np.full(t.size, 0.01), 10)
    assert extract_peaks(curve).peaks == ()
    with pytest.raises(ConfigError):
        extract_peaks(AggregateCurve(t[:2], t[:2], t[:2], 1))


def test_shift_correction_recovers_constant():
    t = np.linspace(1.0, 5.0, 13)
    mean = 0.5 * np.cos(t)
    curve = AggregateCurve(t, mean + 0.003, np.full(t.size, 0.01), 50)
    fixed = shift_correction(curve, t, mean)
    assert fixed.shift_constant == pytest.approx(-0.003, abs=1e-12)
    # only early points enter the fit but the whole curve is shifted
    assert np.allclose(fixed.mean, mean, atol=1e-12)
    assert np.array_equal(fixed.stderr, curve.stderr)
    same = shift_correction(AggregateCurve(t, mean, curve.stderr, 50), t, mean)
    assert same.shift_constant == pytest.approx(0.0, abs=1e-15)


def test_shift_correction_uses_only_early_overlap():
    t = np.linspace(0.0, 4.0, 17)
    mean = np.zeros(t.size)
    ref = np.where(t <= 1.0 + 1e-9, 0.01, 99.0)  # late reference is garbage
    fixed = shift_correction(AggregateCurve(t, mean, mean, 5), t, ref)
    assert fixed.shift_constant == pytest.approx(0.01)


def test_shift_correction_needs_overlap():
    t = np.linspace(0.0, 1.0, 9)
    curve = AggregateCurve(t, np.zeros(9), np.zeros(9), 5)
    with pytest.raises(ConfigError):
        shift_correction(curve, t + 100.0, np.zeros(9))
    with pytest.raises(ConfigError):
        shift_correction(curve, t, np.zeros(9), overlap_frac=0.0)


def test_write_peaks_round_trip(tmp_path):
    path = tmp_path / "peaks.csv"
    series = PeakSeries(peaks=((3.25, 0.41, 0.002), (6.5, 0.38, 0.003)))
    write_peaks(path, series, {"source": "test"})
    meta, cols = read_table(path)
    assert meta == {"source": "test"}
    assert np.array_equal(cols["t_peak"], [3.25, 6.5])
    assert np.array_equal(cols["height"], [0.41, 0.38])


def test_profiles_are_sane():
    assert set(PROFILES) == {"full", "desk", "desk-small"}
    for name, prof in PROFILES.items():
        assert prof["delta"] == 0.5
        assert prof["dt"] == 0.0625
        assert prof["delta_t"] == pytest.approx(1.0 / 3.0)
    assert PROFILES["desk"]["l"] <= 6
    assert PROFILES["desk"]["k_max"] <= 256
    assert PROFILES["desk-small"]["k_max"] <= 64
    assert PROFILES["full"]["k_max"] >= 1024


def test_git_blob_sha1_matches_git(tmp_path):
    # sha1("blob <len>\0" + bytes), the same hash git assigns the file
    path = tmp_path / "x.bin"
    path.write_bytes(b"hello\n")
    assert git_blob_sha1(path) == "ce013625030ba8dba906f756967f9e9ca394464a"
