import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import brute_dt
from rpeakkit.dtmap import (
    DistanceMap,
    PeakExtractionConfig,
    downsample_dt,
    dt_from_peaks,
    peaks_from_dt,
    read_dt_csv,
    roundtrip_property,
    write_dt_csv,
)
from rpeakkit.errors import ConfigError, InputError
from rpeakkit.signal_io import BeatAnnotations


def test_single_peak():
    dt = dt_from_peaks([5], 11, 500)
    np.testing.assert_array_equal(dt.values, np.abs(np.arange(11) - 5) / 500)
    assert dt.values[5] == 0.0


def test_no_peaks_is_all_ones():
    assert dt_from_peaks([], 4, 500).values.tolist() == [1, 1, 1, 1]


def test_two_peaks_frozen():
    # values frozen from brute_dt
    dt = dt_from_peaks([2, 8], 10, 500)
    assert (dt.values * 500).round().astype(int).tolist() == [2, 1, 0, 1, 2, 3, 2, 1, 0, 1]
    dt = dt_from_peaks([2, 9], 10, 500)
    assert (dt.values * 500).round().astype(int).tolist() == [2, 1, 0, 1, 2, 3, 3, 2, 1, 0]


def test_saturation():
    dt = dt_from_peaks([0], 10, 3)
    assert dt.values.tolist() == [0, 1 / 3, 2 / 3, 1, 1, 1, 1, 1, 1, 1]


def test_errors():
    with pytest.raises(InputError):
        dt_from_peaks([10], 10)
    with pytest.raises(InputError):
        dt_from_peaks([-1], 10)
    with pytest.raises(InputError):
        dt_from_peaks([], 0)
    with pytest.raises(ConfigError):
        DistanceMap(np.zeros(3), cap_samples=0)


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 600).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.integers(0, n - 1), max_size=12, unique=True),
                        st.integers(1, 700))))
def test_matches_brute_force(case):
    n, peaks, cap = case
    peaks = sorted(peaks)
    np.testing.assert_array_equal(dt_from_peaks(peaks, n, cap).values, brute_dt(peaks, n, cap))


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 800).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.integers(0, n - 1), min_size=1, max_size=10, unique=True))))
def test_lipschitz_and_zero_set(case):
    n, peaks = case
    v = dt_from_peaks(sorted(peaks), n, 500).values
    assert np.all(np.abs(np.diff(v)) <= 1 / 500 + 1e-15)
    assert set(np.flatnonzero(v == 0).tolist()) == set(peaks)
    assert v.min() >= 0 and v.max() <= 1


# ---------------------------------------------------------------- extraction


def test_roundtrip_examples():
    assert peaks_from_dt(dt_from_peaks([5], 11, 500)).tolist() == [5]
    assert peaks_from_dt(DistanceMap(np.ones(50))).tolist() == []
    assert roundtrip_property([50, 400, 900], 1000)
    assert roundtrip_property([0], 1000)
    assert roundtrip_property([999], 1000)


def test_close_peaks_merge_to_one():
    dt = dt_from_peaks([100, 130], 1000, 500, fs=500)
    assert peaks_from_dt(dt).tolist() == [100]


def test_merge_keeps_deeper_valley():
    v = np.ones(400)
    v[100], v[99], v[101] = 0.05, 0.06, 0.06
    v[150], v[149], v[151] = 0.01, 0.02, 0.02
    assert peaks_from_dt(DistanceMap(v, fs=500)).tolist() == [150]


def test_plateau_reports_midpoint():
    v = np.ones(100)
    v[40:45] = 0.0
    assert peaks_from_dt(DistanceMap(v)).tolist() == [42]
    v = np.ones(100)
    v[40:44] = 0.0  # even plateau: lower midpoint
    assert peaks_from_dt(DistanceMap(v)).tolist() == [41]


def test_threshold_is_strict():
    v = np.ones(100)
    v[50] = 0.1
    assert peaks_from_dt(DistanceMap(v)).tolist() == []
    assert peaks_from_dt(DistanceMap(v), PeakExtractionConfig(valley_threshold=0.11)).tolist() == [50]


@pytest.mark.parametrize("kw", [{"valley_threshold": 0.0}, {"valley_threshold": 1.0}, {"refractory_ms": 0}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        PeakExtractionConfig(**kw)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(100, 400), min_size=0, max_size=15), st.integers(0, 99))
def test_roundtrip_under_separation(gaps, first):
    peaks = np.cumsum([first] + gaps)
    length = int(peaks[-1]) + 1 + 50
    assert roundtrip_property(peaks, length)


# ---------------------------------------------------------------- resampling and CSV


def test_downsample_constant_and_length():
    out = downsample_dt(DistanceMap(np.full(5000, 0.5)), 360)
    assert out.values.size == 3600
    np.testing.assert_allclose(out.values, 0.5)
    assert out.fs == 360 and out.cap_samples == 360


def test_downsample_moves_valley():
    dt = dt_from_peaks([2500], 5000, 500)
    out = downsample_dt(dt, 360)
    assert abs(int(np.argmin(out.values)) - 1800) <= 1


def test_downsample_needs_lower_rate():
    with pytest.raises(ConfigError):
        downsample_dt(DistanceMap(np.ones(10)), 500)


def test_csv_roundtrip(tmp_path):
    dt = dt_from_peaks([3, 40], 64, 500)
    write_dt_csv(tmp_path / "dt.csv", dt)
    back = read_dt_csv(tmp_path / "dt.csv")
    np.testing.assert_array_equal(back.values, dt.values)


def test_accepts_beat_annotations():
    a = dt_from_peaks(BeatAnnotations(np.array([4])), 9).values
    np.testing.assert_array_equal(a, dt_from_peaks([4], 9).values)
