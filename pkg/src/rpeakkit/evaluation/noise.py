"""Noise generators approximating stress-test artifacts, and SNR-controlled mixing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as ss

from ..errors import ConfigError, InputError
from ..signal_io import EcgRecord

NOISE_KINDS = ("baseline_wander", "muscle_artifact", "electrode_motion", "white", "mixed")


@dataclass(frozen=True)
class NoiseMixSpec:
    noise_kind: str
    snr_db: float

    def __post_init__(self):
        if self.noise_kind not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {self.noise_kind!r}; expected one of {NOISE_KINDS}")
        if not np.isfinite(self.snr_db):
            raise ConfigError("snr_db must be finite")


def power(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.mean(x * x))


def _unit_power(x: np.ndarray) -> np.ndarray:
    p = power(x)
    return x / np.sqrt(p) if p > 0 else x


def baseline_wander(n: int, fs: float, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / fs
    x = np.zeros(n)
    for _ in range(4):
        f = rng.uniform(0.05, 0.6)
        x += rng.uniform(0.3, 1.0) * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    return _unit_power(x)


def muscle_artifact(n: int, fs: float, rng: np.random.Generator) -> np.ndarray:
    hi = min(150.0, 0.45 * fs)
    sos = ss.butter(4, [20.0, hi], btype="band", fs=fs, output="sos")
    x = ss.sosfiltfilt(sos, rng.standard_normal(n))
    # bursty envelope: slow random modulation between 0.2 and 1.2
    env_sos = ss.butter(2, 0.5, btype="low", fs=fs, output="sos")
    env = ss.sosfiltfilt(env_sos, rng.standard_normal(n))
    env = 0.2 + np.clip(env / (np.std(env) + 1e-12), 0.0, 2.0) / 2.0
    return _unit_power(x * env)


def electrode_motion(n: int, fs: float, rng: np.random.Generator) -> np.ndarray:
    """Decaying baseline steps plus sharp biphasic transients over low-passed drift."""
    t = np.arange(n) / fs
    x = np.zeros(n)
    n_events = max(1, rng.poisson(n / fs / 1.5))
    for _ in range(n_events):
        t0 = rng.uniform(0, n / fs)
        after = t >= t0
        x[after] += rng.normal(0, 1.0) * np.exp(-(t[after] - t0) / rng.uniform(0.2, 0.8))
        width = rng.uniform(0.015, 0.05)
        x += rng.normal(0, 1.5) * -(t - t0) / width * np.exp(-0.5 * ((t - t0) / width) ** 2)
    sos = ss.butter(2, min(8.0, 0.45 * fs), btype="low", fs=fs, output="sos")
    drift = ss.sosfiltfilt(sos, rng.standard_normal(n))
    x += 0.3 * drift / (np.std(drift) + 1e-12)
    return _unit_power(x)


def make_noise(kind: str, n: int, fs: float, seed: int = 0) -> np.ndarray:
    """Unit-power noise of the requested kind; ``mixed`` sums the three artifact kinds."""
    if kind not in NOISE_KINDS:
        raise ConfigError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")
    rng = np.random.default_rng(seed)
    if kind == "white":
        return _unit_power(rng.standard_normal(n))
    if kind == "baseline_wander":
        return baseline_wander(n, fs, rng)
    if kind == "muscle_artifact":
        return muscle_artifact(n, fs, rng)
    if kind == "electrode_motion":
        return electrode_motion(n, fs, rng)
    parts = [baseline_wander(n, fs, rng), muscle_artifact(n, fs, rng), electrode_motion(n, fs, rng)]
    return _unit_power(sum(parts))


def noise_scale(p_clean: float, p_noise: float, snr_db: float) -> float:
    return float(np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0))))


def mix_noise(clean: EcgRecord, noise, snr_db: float) -> EcgRecord:
    """Add ``noise`` scaled so the result has the requested SNR in dB.

    Noise shorter than the record is tiled. Powers are mean squares over the
    mixed extent, so the measured SNR matches the target up to rounding.
    """
    noise = np.asarray(noise, dtype=np.float64).reshape(-1)
    if noise.size == 0:
        raise InputError("empty noise sequence")
    n = len(clean)
    if noise.size < n:
        noise = np.tile(noise, int(np.ceil(n / noise.size)))
    noise = noise[:n]
    p_clean, p_noise = power(clean.samples), power(noise)
    if p_noise == 0:
        raise InputError("noise has zero power")
    if p_clean == 0:
        raise InputError("clean record has zero power")
    alpha = noise_scale(p_clean, p_noise, snr_db)
    return EcgRecord(clean.record_id, clean.samples + alpha * noise, clean.fs,
                     clean.lead_name, clean.units)


def measured_snr_db(clean, noisy) -> float:
    clean = np.asarray(getattr(clean, "samples", clean), dtype=np.float64)
    noisy = np.asarray(getattr(noisy, "samples", noisy), dtype=np.float64)
    return 10.0 * np.log10(power(clean) / power(noisy - clean))
