"""Hamilton's QRS detector: band-pass, rectified derivative, 80 ms average, adaptive threshold."""
from __future__ import annotations

from collections import deque

import numpy as np

from ..signal_io import BeatAnnotations, EcgRecord
from . import constants as C
from .common import (DetectorOutput, bandpass, candidate_peaks, check_record, cleaned, finish,
                     moving_average)

NAME = "hamilton"


def hamilton_feature(x: np.ndarray, fs: float):
    """Return (band-passed signal, rectified slope, 80 ms moving average of the slope)."""
    bp = bandpass(x, fs, *C.HAMILTON_BAND_HZ)
    slope = np.abs(np.diff(bp, prepend=bp[0]))
    return bp, slope, moving_average(slope, round(C.HAMILTON_MA_S * fs))


def hamilton_detect(rec: EcgRecord) -> DetectorOutput:
    check_record(rec, NAME)
    fs = rec.fs
    x = rec.samples - np.median(rec.samples)
    _, slope, feat = hamilton_feature(x, fs)
    if not np.any(feat > 0):
        return DetectorOutput(BeatAnnotations(), NAME)

    # rule 1: a peak within 200 ms of a larger one is ignored
    cands = candidate_peaks(feat, fs)
    if cands.size == 0:
        return DetectorOutput(BeatAnnotations(), NAME)

    one_s = int(fs)
    n_init = max(1, min(int(C.HAMILTON_INIT_S), int(len(x) // one_s)))
    qrs_buf = deque([feat[i * one_s : (i + 1) * one_s].max() for i in range(n_init)],
                    maxlen=C.HAMILTON_BUFFER)
    noise_buf = deque([0.0], maxlen=C.HAMILTON_BUFFER)
    rr_buf = deque([float(fs)], maxlen=C.HAMILTON_BUFFER)

    def threshold():
        npk, qpk = np.median(noise_buf), np.median(qrs_buf)
        return npk + C.HAMILTON_TH * (qpk - npk)

    def max_slope(i):
        r = int(0.06 * fs)
        return slope[max(0, i - r) : i + r + 1].max()

    beats = []
    dt = threshold()
    twave = C.HAMILTON_TWAVE_S * fs
    for k, c in enumerate(cands.tolist()):
        # search back: no beat for 1.5 RR -> best skipped peak above half threshold
        if beats and c - beats[-1] > C.HAMILTON_SEARCHBACK_RR * np.mean(rr_buf):
            lo = beats[-1] + C.HAMILTON_SEARCHBACK_MIN_S * fs
            missed = [p for p in cands[:k].tolist() if lo < p < c and feat[p] > 0.5 * dt]
            if missed:
                best = max(missed, key=lambda p: feat[p])
                rr_buf.append(best - beats[-1])
                beats.append(best)
                qrs_buf.append(feat[best])
                dt = threshold()

        v = feat[c]
        if v > dt:
            if beats and c - beats[-1] < twave and max_slope(c) < 0.5 * max_slope(beats[-1]):
                noise_buf.append(v)
            elif beats and c - beats[-1] < C.REFRACTORY_S * fs:
                continue
            else:
                if beats:
                    rr_buf.append(c - beats[-1])
                beats.append(c)
                qrs_buf.append(v)
        else:
            noise_buf.append(v)
        dt = threshold()

    return finish(NAME, cleaned(rec), beats, fs, C.HAMILTON_REFINE_S)

