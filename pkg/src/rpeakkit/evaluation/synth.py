"""Synthetic ECG with exact R-peak ground truth."""
from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from ..errors import ConfigError
from ..signal_io import BeatAnnotations, EcgRecord

# (offset from R in s, amplitude in mV, gaussian width in s) for P, Q, R, S, T
WAVES = (
    (-0.200, 0.15, 0.025),
    (-0.030, -0.15, 0.010),
    (0.000, 1.00, 0.010),
    (0.030, -0.25, 0.010),
    (0.280, 0.30, 0.045),
)
_R_WAVE = 2


def synth_ecg(
    fs: float = 500.0,
    duration_s: float = 10.0,
    mean_hr_bpm: float = 60.0,
    hr_jitter: float = 0.0,
    seed: int = 0,
    morphology_jitter: float = 0.0,
    first_peak_s: Optional[float] = None,
    record_id: Optional[str] = None,
) -> Tuple[EcgRecord, BeatAnnotations]:
    """Sum of Gaussian P-QRS-T bumps at jittered RR intervals.

    ``hr_jitter`` is the relative standard deviation of each RR interval and
    ``morphology_jitter`` the relative spread of wave amplitudes and widths
    (drawn once per record and perturbed per beat). The first R-peak sits half
    an RR interval into the record unless ``first_peak_s`` is given.
    """
    if not 30.0 <= mean_hr_bpm <= 220.0:
        raise ConfigError(f"mean_hr_bpm must lie in [30, 220], got {mean_hr_bpm}")
    if fs <= 0 or duration_s <= 0:
        raise ConfigError("fs and duration_s must be positive")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * fs))
    rr_mean = 60.0 / mean_hr_bpm

    def next_rr():
        if hr_jitter <= 0:
            return rr_mean
        return float(np.clip(rr_mean * (1.0 + hr_jitter * rng.standard_normal()),
                             0.6 * rr_mean, 1.6 * rr_mean))

    # beat times: one extra beat on each side so edge waves are realistic
    t0 = rr_mean / 2 if first_peak_s is None else first_peak_s
    times = [t0 - rr_mean]
    t = t0
    while t < duration_s + rr_mean:
        times.append(t)
        t += next_rr()

    base = np.array(WAVES, dtype=np.float64)
    if morphology_jitter > 0:
        scale = 1.0 + morphology_jitter * rng.standard_normal((len(WAVES), 2))
        base[:, 1] *= np.clip(scale[:, 0], 0.3, 2.0)
        base[:, 2] *= np.clip(scale[:, 1], 0.6, 1.6)

    tt = np.arange(n) / fs
    x = np.zeros(n)
    peaks = []
    for tb in times:
        waves = base.copy()
        if morphology_jitter > 0:
            waves[:, 1] *= 1.0 + 0.25 * morphology_jitter * rng.standard_normal(len(WAVES))
        # T wave moves with the local rate (Bazett-like sqrt scaling)
        waves[4, 0] *= np.sqrt(rr_mean)
        for offset, amp, width in waves:
            centre = tb + offset
            lo = max(0, int((centre - 5 * width) * fs))
            hi = min(n, int((centre + 5 * width) * fs) + 2)
            if lo < hi:
                seg = tt[lo:hi]
                x[lo:hi] += amp * np.exp(-0.5 * ((seg - centre) / width) ** 2)
        idx = int(np.floor(tb * fs + 0.5))
        if 0 <= idx < n:
            peaks.append(idx)

    rid = record_id if record_id is not None else f"synth-{seed}"
    return EcgRecord(rid, x, fs, "synthetic"), BeatAnnotations(np.array(peaks, dtype=np.int64))


def synth_corpus(n_records: int, fs: float = 500.0, duration_s: float = 10.0, seed: int = 0,
                 hr_range=(50.0, 110.0), hr_jitter: float = 0.08,
                 morphology_jitter: float = 0.15, random_phase: bool = True):
    """Varied synthetic records: random rate, rhythm jitter, morphology and phase."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_records):
        hr = float(rng.uniform(*hr_range))
        phase = float(rng.uniform(0.05, 60.0 / hr)) if random_phase else None
        out.append(synth_ecg(fs, duration_s, hr, hr_jitter, int(rng.integers(2**31)),
                             morphology_jitter, phase, record_id=f"synth-{seed}-{i:04d}"))
    return out
