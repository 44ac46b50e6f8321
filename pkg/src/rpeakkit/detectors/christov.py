"""Christov's detector: complex lead against a combined adaptive threshold M + F + R.

M follows steep-slope amplitude, F integrates high-frequency activity and R
lowers the threshold when the next beat is overdue.
"""
from __future__ import annotations

from collections import deque

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as ss

from ..signal_io import BeatAnnotations, EcgRecord
from . import constants as C
from .common import DetectorOutput, check_record, cleaned, finish

NAME = "christov"


def _ma_zero_phase(x: np.ndarray, width: int) -> np.ndarray:
    width = max(1, int(round(width)))
    return ss.filtfilt(np.ones(width) / width, [1.0], x, padlen=min(3 * width, x.size - 1))


def complex_lead(x: np.ndarray, fs: float) -> np.ndarray:
    x = _ma_zero_phase(x, C.CHRISTOV_POWERLINE_MA_S * fs)
    x = _ma_zero_phase(x, C.CHRISTOV_EMG_MA_S * fs)
    y = np.zeros_like(x)
    y[1:-1] = np.abs(x[2:] - x[:-2])
    return _ma_zero_phase(y, C.CHRISTOV_COMPLEX_MA_S * fs)


def f_threshold(y: np.ndarray, win: int, sub: int) -> np.ndarray:
    """F at every sample: mean over the last ``win - sub`` samples of max(y[j-sub:j]).

    Causal from the start: early samples average over the history available,
    and samples before the record count as zero.
    """
    n = y.size
    a = sliding_window_view(np.concatenate([np.zeros(sub), y]), sub)[:n].max(axis=1)
    span = max(1, win - sub)
    c = np.concatenate(([0.0], np.cumsum(a)))
    i = np.arange(n)
    lo = np.maximum(0, i + 1 - span)
    return (c[i + 1] - c[lo]) / (i + 1 - lo)


def christov_detect(rec: EcgRecord) -> DetectorOutput:
    check_record(rec, NAME)
    fs = rec.fs
    y = complex_lead(rec.samples - np.median(rec.samples), fs)
    if not np.max(y) > 1e-12 * max(1.0, np.max(np.abs(rec.samples))):
        return DetectorOutput(BeatAnnotations(), NAME)

    n = y.size
    ms200 = int(round(C.REFRACTORY_S * fs))
    ms1200 = int(round(C.CHRISTOV_M_DECAY_END_S * fs))
    win_f = int(round(C.CHRISTOV_F_WINDOW_S * fs))
    sub_f = max(1, int(round(C.CHRISTOV_F_SUB_S * fs)))
    peak_search = int(round(C.CHRISTOV_LOCATE_S * fs))

    m_buf = deque([C.CHRISTOV_M_FACTOR * y[: int(C.CHRISTOV_INIT_S * fs)].max()] * 5, maxlen=5)
    m_base = float(np.mean(m_buf))
    M = m_base
    f_trace = f_threshold(y, win_f, sub_f)
    R, r_dec = 0.0, 0.0
    rr_buf = deque(maxlen=C.CHRISTOV_RR_BUFFER)
    qrs = []

    for i in range(n):
        if qrs:
            since = i - qrs[-1]
            if since < ms200:
                pass
            elif since == ms200:
                new_m = C.CHRISTOV_M_FACTOR * y[qrs[-1] : qrs[-1] + ms200].max()
                limit, repl = C.CHRISTOV_M_CLAMP
                if new_m > limit * m_buf[-1]:
                    new_m = repl * m_buf[-1]
                m_buf.append(new_m)
                m_base = float(np.mean(m_buf))
                M = m_base
                r_dec = (1.0 - C.CHRISTOV_M_DECAY_TO) * m_base / (ms1200 - ms200)
                r_dec /= C.CHRISTOV_R_DECAY_SLOWER
            elif since < ms1200:
                frac = (since - ms200) / (ms1200 - ms200)
                M = m_base * (1.0 - (1.0 - C.CHRISTOV_M_DECAY_TO) * frac)

            if rr_buf:
                rm = float(np.mean(rr_buf))
                if since < 2.0 * rm / 3.0:
                    R = 0.0
                elif since < rm:
                    R -= r_dec

        F = f_trace[i]
        refractory = bool(qrs) and i - qrs[-1] <= ms200
        if not refractory and y[i] > M + F + R and M > 0:
            if qrs:
                rr_buf.append(i - qrs[-1])
            qrs.append(i)
            R = 0.0

    located = [q + int(np.argmax(y[q : q + peak_search])) for q in qrs]
    return finish(NAME, cleaned(rec), located, fs, C.CHRISTOV_REFINE_S)
