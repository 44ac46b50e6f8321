"""Pieces shared by the classic detectors."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal as ss

from ..errors import InputError
from ..signal_io import BeatAnnotations, EcgRecord
from . import constants as C


@dataclass
class DetectorOutput:
    peaks: BeatAnnotations
    detector_name: str


def check_record(rec: EcgRecord, name: str, min_duration_s: float = C.MIN_DURATION_S) -> None:
    if rec.fs < C.MIN_FS:
        raise InputError(f"{name} needs fs >= {C.MIN_FS} Hz, got {rec.fs}")
    if rec.duration_s < min_duration_s:
        raise InputError(f"{name} needs at least {min_duration_s} s of signal")


def bandpass(x: np.ndarray, fs: float, lo: float, hi: float, order: int = 2) -> np.ndarray:
    hi = min(hi, 0.45 * fs)
    sos = ss.butter(order, [lo, hi], btype="band", fs=fs, output="sos")
    # scipy's default edge padding needs a few dozen samples; shrink it for tiny inputs
    padlen = min(3 * (2 * len(sos) + 1), x.size - 1)
    return ss.sosfiltfilt(sos, x, padlen=max(padlen, 0))


def moving_average(x: np.ndarray, width: int) -> np.ndarray:
    """Centred moving average (zero phase for odd widths)."""
    width = max(1, int(width))
    return np.convolve(x, np.ones(width) / width, mode="same")


def cleaned(rec: EcgRecord) -> np.ndarray:
    """Drift- and hiss-suppressed copy of the raw trace, used to place R-peaks."""
    return bandpass(rec.samples - np.median(rec.samples), rec.fs, 0.5, 45.0)


def candidate_peaks(feature: np.ndarray, fs: float) -> np.ndarray:
    """Local maxima of ``feature`` at least one refractory period apart.

    Zero-padding lets a maximum on the first or last sample qualify, so a
    beat cut by the record boundary still yields a candidate.
    """
    padded = np.pad(feature, 1)
    idx, _ = ss.find_peaks(padded, distance=max(1, int(C.REFRACTORY_S * fs)))
    return idx - 1


def polarity(x: np.ndarray, candidates: Sequence[int], fs: float) -> float:
    """+1 when QRS complexes deflect upwards around the candidates, else -1."""
    if len(candidates) == 0:
        return 1.0
    r = max(1, int(0.05 * fs))
    up, down = [], []
    for i in candidates:
        seg = x[max(0, i - r) : i + r + 1]
        up.append(seg.max())
        down.append(-seg.min())
    return 1.0 if np.median(up) >= np.median(down) else -1.0


def refine(x: np.ndarray, candidates: Sequence[int], fs: float, radius_s: float,
           sign: float = 1.0) -> np.ndarray:
    """Move each candidate to the signed extremum of ``x`` within +-radius."""
    r = max(1, int(round(radius_s * fs)))
    out = []
    for i in candidates:
        lo, hi = max(0, i - r), min(x.size, i + r + 1)
        out.append(lo + int(np.argmax(sign * x[lo:hi])))
    return np.array(out, dtype=np.int64)


def enforce_refractory(peaks: np.ndarray, strength: np.ndarray, min_gap: float) -> np.ndarray:
    """Sort, deduplicate and drop the weaker of any two peaks closer than ``min_gap``."""
    if peaks.size == 0:
        return peaks.astype(np.int64)
    order = np.argsort(peaks, kind="stable")
    peaks, strength = peaks[order], strength[order]
    kept_p, kept_s = [int(peaks[0])], [float(strength[0])]
    for p, s in zip(peaks[1:].tolist(), strength[1:].tolist()):
        if p - kept_p[-1] >= min_gap:
            kept_p.append(p)
            kept_s.append(s)
        elif s > kept_s[-1]:
            kept_p[-1], kept_s[-1] = p, s
    return np.array(kept_p, dtype=np.int64)


def finish(name: str, x_clean: np.ndarray, candidates, fs: float, radius_s: float) -> DetectorOutput:
    candidates = np.asarray(candidates, dtype=np.int64)
    if candidates.size == 0:
        return DetectorOutput(BeatAnnotations(), name)
    sign = polarity(x_clean, candidates, fs)
    peaks = refine(x_clean, candidates, fs, radius_s, sign)
    # an extremum pinned to the boundary belongs to a complex outside the record
    keep = (peaks > 0) & (peaks < x_clean.size - 1)
    peaks = peaks[keep]
    peaks = enforce_refractory(peaks, sign * x_clean[peaks], C.REFRACTORY_S * fs)
    return DetectorOutput(BeatAnnotations(peaks), name)
