"""Distance-transform targets and valley-based peak extraction.

A distance map holds, for every sample, the distance to the nearest R-peak,
saturated at ``cap_samples`` and divided by it so values live in [0, 1].
Peaks sit at the zeros; a trained network reproduces them as valleys.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, InputError
from .signal_io import BeatAnnotations, resample_linear

DEFAULT_CAP_SAMPLES = 500
DEFAULT_FS = 500.0


@dataclass
class DistanceMap:
    values: np.ndarray
    cap_samples: int = DEFAULT_CAP_SAMPLES
    fs: float = DEFAULT_FS

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.cap_samples <= 0:
            raise ConfigError("cap_samples must be positive")

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class PeakExtractionConfig:
    valley_threshold: float = 0.1
    refractory_ms: float = 200.0

    def __post_init__(self):
        if not 0.0 < self.valley_threshold < 1.0:
            raise ConfigError(f"valley_threshold must lie in (0, 1), got {self.valley_threshold}")
        if self.refractory_ms <= 0:
            raise ConfigError("refractory_ms must be positive")


def _as_indices(peaks) -> np.ndarray:
    if isinstance(peaks, BeatAnnotations):
        return peaks.sample_indices
    return np.asarray(peaks, dtype=np.int64).reshape(-1)


def dt_from_peaks(peaks, length: int, cap_samples: int = DEFAULT_CAP_SAMPLES,
                  fs: float = DEFAULT_FS) -> DistanceMap:
    """Normalized distance to the nearest peak, computed with two linear sweeps."""
    if length <= 0:
        raise InputError("length must be positive")
    idx = _as_indices(peaks)
    if idx.size and (idx.min() < 0 or idx.max() >= length):
        raise InputError(f"peak indices must lie in [0, {length})")

    pos = np.arange(length, dtype=np.float64)
    is_peak = np.zeros(length, dtype=bool)
    is_peak[idx] = True
    # forward sweep: distance to the last peak at or before i
    last = np.maximum.accumulate(np.where(is_peak, pos, -np.inf))
    # backward sweep: distance to the next peak at or after i
    nxt = np.minimum.accumulate(np.where(is_peak, pos, np.inf)[::-1])[::-1]
    dist = np.minimum(pos - last, nxt - pos)
    values = np.minimum(dist, cap_samples) / cap_samples
    return DistanceMap(values, cap_samples, fs)


def _local_minima(values: np.ndarray) -> np.ndarray:
    """Indices of local minima; flat minima report the plateau midpoint."""
    n = values.size
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    change = np.flatnonzero(np.diff(values) != 0) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [n])) - 1
    run_vals = values[starts]
    left_ok = np.ones(starts.size, dtype=bool)
    right_ok = np.ones(starts.size, dtype=bool)
    left_ok[1:] = run_vals[:-1] > run_vals[1:]
    right_ok[:-1] = run_vals[1:] > run_vals[:-1]
    keep = left_ok & right_ok
    return (starts[keep] + ends[keep]) // 2


def peaks_from_dt(dt: DistanceMap, cfg: PeakExtractionConfig = PeakExtractionConfig()) -> BeatAnnotations:
    """Sub-threshold valleys of ``dt``, thinned so none are closer than the refractory period.

    Among competing valleys the deeper one wins; equal depths go to the
    earlier index.
    """
    values = dt.values
    if values.size == 0:
        raise InputError("empty distance map")
    cand = _local_minima(values)
    cand = cand[values[cand] < cfg.valley_threshold]
    if cand.size == 0:
        return BeatAnnotations(np.zeros(0, dtype=np.int64))

    refractory = cfg.refractory_ms * dt.fs / 1000.0
    order = np.lexsort((cand, values[cand]))
    kept = []
    for i in cand[order]:
        if all(abs(int(i) - k) >= refractory for k in kept):
            kept.append(int(i))
    return BeatAnnotations(np.array(sorted(kept), dtype=np.int64))


def roundtrip_property(peaks, length: int, cfg: PeakExtractionConfig = PeakExtractionConfig(),
                       cap_samples: int = DEFAULT_CAP_SAMPLES, fs: float = DEFAULT_FS) -> bool:
    idx = _as_indices(peaks)
    dt = dt_from_peaks(idx, length, cap_samples, fs)
    return np.array_equal(peaks_from_dt(dt, cfg).sample_indices, idx)


def downsample_dt(dt: DistanceMap, fs_out: float) -> DistanceMap:
    """Resample a distance map to a lower rate (e.g. 500 Hz back to 360 Hz)."""
    if fs_out >= dt.fs:
        raise ConfigError(f"downsample_dt needs fs_out < {dt.fs}, got {fs_out}")
    values = np.clip(resample_linear(dt.values, dt.fs, fs_out), 0.0, 1.0)
    cap = max(1, int(round(dt.cap_samples * fs_out / dt.fs)))
    return DistanceMap(values, cap, fs_out)


def write_dt_csv(path, dt: DistanceMap) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{v!r}\n" for v in dt.values.tolist())


def read_dt_csv(path, cap_samples: int = DEFAULT_CAP_SAMPLES, fs: float = DEFAULT_FS) -> DistanceMap:
    with open(path, encoding="utf-8") as fh:
        values = [float(line) for line in fh if line.strip()]
    return DistanceMap(np.array(values), cap_samples, fs)
