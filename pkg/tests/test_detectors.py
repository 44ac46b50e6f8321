import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpeakkit.detectors import (
    CLASSIC,
    christov_detect,
    get_detector,
    hamilton_detect,
    iswt,
    registered_names,
    swt,
    swt_detect,
)
from rpeakkit.detectors.swt import DB4_LOWPASS, detail_delay, level_for_fs, qmf_highpass
from rpeakkit.errors import ConfigError, InputError
from rpeakkit.evaluation import match_peaks, metrics, mix_noise, synth_corpus, synth_ecg
from rpeakkit.signal_io import EcgRecord

DETECTORS = sorted(CLASSIC.items())


# ---------------------------------------------------------------- wavelet core


def test_db4_is_orthonormal():
    h = DB4_LOWPASS
    assert h.sum() == pytest.approx(np.sqrt(2), abs=1e-12)
    assert (h * h).sum() == pytest.approx(1.0, abs=1e-12)
    for shift in (2, 4, 6):
        assert np.dot(h[shift:], h[:-shift]) == pytest.approx(0.0, abs=1e-12)
    g = qmf_highpass(h)
    assert g.sum() == pytest.approx(0.0, abs=1e-12)
    assert np.dot(h, g) == pytest.approx(0.0, abs=1e-12)


def test_impulse_details_match_convolution():
    n = 256
    x = np.zeros(n)
    x[0] = 1.0
    c = swt(x, 3)
    h, g = DB4_LOWPASS, qmf_highpass(DB4_LOWPASS)
    np.testing.assert_allclose(c.details[0][:8], g, atol=1e-15)
    assert np.all(c.details[0][8:] == 0)

    def up(taps, step):
        out = np.zeros((taps.size - 1) * step + 1)
        out[::step] = taps
        return out

    level2 = np.convolve(h, up(g, 2))
    np.testing.assert_allclose(c.details[1][: level2.size], level2, atol=1e-15)
    level3 = np.convolve(np.convolve(h, up(h, 2)), up(g, 4))
    np.testing.assert_allclose(c.details[2][: level3.size], level3, atol=1e-15)


def test_dc_has_no_detail():
    c = swt(np.full(300, 4.2), 5)
    for d in c.details:
        assert np.max(np.abs(d)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(16, 400), st.integers(0, 2**31 - 1))
def test_swt_roundtrip(levels, n, seed):
    x = np.random.default_rng(seed).standard_normal(n)
    c = swt(x, levels)
    assert all(d.size == n for d in c.details) and c.levels == levels
    np.testing.assert_allclose(iswt(c), x, atol=1e-8)


def test_swt_config_errors():
    with pytest.raises(ConfigError):
        swt(np.zeros(10), 0)
    with pytest.raises(ConfigError):
        swt(np.zeros(10), 1, wavelet="haar9")


def test_level_table():
    assert level_for_fs(128) == 2
    assert level_for_fs(250) == 3 and level_for_fs(360) == 3
    assert level_for_fs(500) == 4
    assert level_for_fs(1000) == 5
    assert detail_delay(1) >= 0 and detail_delay(4) > detail_delay(3)


# ---------------------------------------------------------------- detector contract


@pytest.mark.parametrize("name,detect", DETECTORS)
def test_flat_signals_yield_nothing(name, detect):
    for value in (0.0, 1.7):
        out = detect(EcgRecord("flat", np.full(5000, value), 500.0))
        assert out.peaks.sample_indices.tolist() == []
        assert out.detector_name == name


@pytest.mark.parametrize("name,detect", [("hamilton", hamilton_detect), ("christov", christov_detect)])
def test_short_record_rejected(name, detect):
    with pytest.raises(InputError):
        detect(EcgRecord("short", np.zeros(500), 500.0))


def test_swt_pads_short_records():
    rec, _ = synth_ecg(500.0, 1.0, 90.0)
    out = swt_detect(rec)
    assert np.all(np.diff(out.peaks.sample_indices) > 0)


@pytest.mark.parametrize("name,detect", DETECTORS)
def test_clean_synthetic_f1(name, detect):
    rec, truth = synth_ecg(500.0, 30.0, 60.0)
    out = detect(rec)
    assert metrics(match_peaks(out.peaks, truth, rec.fs)).f1 >= 0.99


@pytest.mark.parametrize("fs", [250.0, 360.0])
@pytest.mark.parametrize("name,detect", DETECTORS)
def test_other_rates(name, detect, fs):
    rec, truth = synth_ecg(fs, 20.0, 75.0, hr_jitter=0.05, seed=3)
    assert metrics(match_peaks(detect(rec).peaks, truth, fs)).f1 >= 0.99


@pytest.mark.parametrize("name,detect", DETECTORS)
def test_output_contract_and_determinism(name, detect):
    for rec, _ in synth_corpus(4, seed=11):
        noisy = mix_noise(rec, np.random.default_rng(0).standard_normal(len(rec)), 6.0)
        a, b = detect(noisy).peaks.sample_indices, detect(noisy).peaks.sample_indices
        assert np.array_equal(a, b)
        assert np.all(np.diff(a) >= 0.2 * rec.fs)
        assert a.size == 0 or (a[0] >= 0 and a[-1] < len(rec))


def test_inverted_lead_still_detected():
    rec, truth = synth_ecg(500.0, 20.0, 70.0, seed=2)
    flipped = EcgRecord("neg", -rec.samples, rec.fs)
    for _, detect in DETECTORS:
        assert metrics(match_peaks(detect(flipped).peaks, truth, rec.fs)).f1 >= 0.99


def test_swt_white_noise_6db():
    tp = fp = fn = 0
    for i, (rec, truth) in enumerate(synth_corpus(10, seed=21)):
        noise = np.random.default_rng(i).standard_normal(len(rec))
        mr = match_peaks(swt_detect(mix_noise(rec, noise, 6.0)).peaks, truth, rec.fs)
        tp, fp, fn = tp + mr.tp, fp + mr.fp, fn + mr.fn
    from rpeakkit.evaluation.matching import MatchResult

    assert metrics(MatchResult(tp, fp, fn)).f1 >= 0.90


def test_christov_f_threshold_matches_direct_mean():
    from rpeakkit.detectors.christov import f_threshold

    y = np.abs(np.random.default_rng(4).standard_normal(400))
    win, sub = 175, 25
    f = f_threshold(y, win, sub)
    padded = np.concatenate([np.zeros(sub), y])
    running_max = [padded[j : j + sub].max() for j in range(y.size)]  # max(y[j-sub:j])
    for i in (0, 10, 149, 150, 250, 399):
        expected = np.mean(running_max[max(0, i - (win - sub) + 1) : i + 1])
        assert f[i] == pytest.approx(expected, rel=1e-12)
    assert np.all(f >= 0)


# ---------------------------------------------------------------- registry


def test_registry():
    assert registered_names() == ["christov", "hamilton", "rpnet", "swt"]
    assert get_detector("swt") is swt_detect
    with pytest.raises(ConfigError, match="registered"):
        get_detector("pan-tompkins")
    with pytest.raises(ConfigError):
        get_detector("rpnet")
