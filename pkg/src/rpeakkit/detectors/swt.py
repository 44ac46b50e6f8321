"""Undecimated (a trous) wavelet transform and the SWT-based R-peak detector."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..errors import ConfigError
from ..signal_io import BeatAnnotations, EcgRecord
from . import constants as C
from .common import DetectorOutput, candidate_peaks, check_record, cleaned, finish, moving_average

NAME = "swt"

# Daubechies-4 scaling filter (8 taps), sum = sqrt(2)
DB4_LOWPASS = np.array([
    0.23037781330885523,
    0.7148465705525415,
    0.6308807679295904,
    -0.02798376941698385,
    -0.18703481171888114,
    0.030841381835986965,
    0.032883011666982945,
    -0.010597401784997278,
])


def qmf_highpass(lowpass: np.ndarray) -> np.ndarray:
    """Quadrature mirror: g[n] = (-1)^n h[N-1-n]."""
    n = np.arange(lowpass.size)
    return (-1.0) ** n * lowpass[::-1]


WAVELETS = {"db4": DB4_LOWPASS}


@dataclass
class SWTCoefficients:
    approximations: List[np.ndarray]
    details: List[np.ndarray]
    wavelet: str = "db4"

    @property
    def levels(self) -> int:
        return len(self.details)


def _filters(wavelet: str):
    try:
        h = WAVELETS[wavelet]
    except KeyError:
        raise ConfigError(f"unknown wavelet {wavelet!r}; available: {sorted(WAVELETS)}") from None
    return h, qmf_highpass(h)


def _circular_filter(x: np.ndarray, taps: np.ndarray, step: int) -> np.ndarray:
    # y[n] = sum_k taps[k] * x[n - k*step]  (periodic extension)
    out = np.zeros_like(x)
    for k, t in enumerate(taps):
        out += t * np.roll(x, k * step)
    return out


def _circular_adjoint(y: np.ndarray, taps: np.ndarray, step: int) -> np.ndarray:
    out = np.zeros_like(y)
    for k, t in enumerate(taps):
        out += t * np.roll(y, -k * step)
    return out


def swt(x, levels: int, wavelet: str = "db4") -> SWTCoefficients:
    """Stationary wavelet decomposition; every band keeps the input length."""
    if levels < 1:
        raise ConfigError("levels must be >= 1")
    h, g = _filters(wavelet)
    a = np.asarray(x, dtype=np.float64).copy()
    approx, details = [], []
    for j in range(levels):
        step = 2 ** j
        details.append(_circular_filter(a, g, step))
        a = _circular_filter(a, h, step)
        approx.append(a)
    return SWTCoefficients(approx, details, wavelet)


def iswt(coeffs: SWTCoefficients) -> np.ndarray:
    """Exact inverse of :func:`swt` (orthogonal filters: |H|^2 + |G|^2 = 2)."""
    h, g = _filters(coeffs.wavelet)
    a = coeffs.approximations[-1]
    for j in reversed(range(coeffs.levels)):
        step = 2 ** j
        a = 0.5 * (_circular_adjoint(a, h, step) + _circular_adjoint(coeffs.details[j], g, step))
    return a


def level_for_fs(fs: float) -> int:
    for bound, level in C.SWT_LEVEL_BY_FS:
        if fs < bound:
            return level
    return C.SWT_LEVEL_BY_FS[-1][1]


def detail_delay(level: int, wavelet: str = "db4") -> int:
    """Energy centroid of the level-``level`` detail impulse response, in samples."""
    n = 8 * (2 ** level) * len(WAVELETS[wavelet])
    impulse = np.zeros(n)
    impulse[0] = 1.0
    d = swt(impulse, level, wavelet).details[-1]
    e = d * d
    return int(round(np.sum(np.arange(n) * e) / e.sum()))


def adaptive_peaks(feature: np.ndarray, fs: float) -> List[int]:
    """Pan-Tompkins style dual-threshold peak picking with search-back."""
    refractory = C.REFRACTORY_S * fs
    cands = candidate_peaks(feature, fs)
    if cands.size == 0:
        return []
    head = feature[: int(2 * fs)]
    spk, npk = 0.25 * head.max(), 0.5 * head.mean()
    th1 = npk + C.PT_THRESHOLD_FRACTION * (spk - npk)
    beats: List[int] = []
    rr: List[int] = []
    for k, c in enumerate(cands.tolist()):
        if len(rr) >= 2 and beats and c - beats[-1] > C.PT_SEARCHBACK_RR * np.mean(rr[-8:]):
            th2 = 0.5 * th1
            missed = [p for p in cands[:k].tolist()
                      if beats[-1] + refractory <= p <= c - refractory and feature[p] > th2]
            if missed:
                best = max(missed, key=lambda p: feature[p])
                rr.append(best - beats[-1])
                beats.append(best)
                spk = 0.25 * feature[best] + 0.75 * spk
        v = feature[c]
        if v > th1 and (not beats or c - beats[-1] >= refractory):
            if beats:
                rr.append(c - beats[-1])
            beats.append(c)
            spk = C.PT_SIGNAL_RATE * v + (1 - C.PT_SIGNAL_RATE) * spk
        else:
            npk = C.PT_NOISE_RATE * v + (1 - C.PT_NOISE_RATE) * npk
        th1 = npk + C.PT_THRESHOLD_FRACTION * (spk - npk)
    return beats


def swt_detect(rec: EcgRecord, level: Optional[int] = None, wavelet: str = C.SWT_WAVELET) -> DetectorOutput:
    # short records are padded rather than rejected
    check_record(rec, NAME, min_duration_s=0.0)
    fs = rec.fs
    level = level_for_fs(fs) if level is None else level
    x = rec.samples - np.median(rec.samples)
    if not np.any(x):
        return DetectorOutput(BeatAnnotations(), NAME)

    # reflect-pad so the periodic transform does not wrap QRS energy across the ends
    pad = len(WAVELETS[wavelet]) * 2 ** level
    pad += (-(x.size + 2 * pad)) % (2 ** level)
    xp = np.pad(x, (pad, pad), mode="reflect" if x.size > pad else "constant")
    d = swt(xp, level, wavelet).details[-1]
    d = np.roll(d, -detail_delay(level, wavelet))[pad : pad + x.size]
    feature = moving_average(d * d, round(C.SWT_SMOOTH_S * fs))
    return finish(NAME, cleaned(rec), adaptive_peaks(feature, fs), fs, C.SWT_REFINE_S)
