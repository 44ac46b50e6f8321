"""Detector registry: classic baselines plus the distance-transform network.

Every detector maps an :class:`EcgRecord` to a :class:`DetectorOutput`.
"""
from __future__ import annotations

from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from ..dtmap import DEFAULT_CAP_SAMPLES, DEFAULT_FS, DistanceMap, PeakExtractionConfig
from ..errors import ConfigError
from ..signal_io import BeatAnnotations, EcgRecord, Window, resample_linear
from . import constants
from .christov import christov_detect
from .common import DetectorOutput, enforce_refractory
from .hamilton import hamilton_detect
from .swt import iswt, swt, swt_detect

Detector = Callable[[EcgRecord], DetectorOutput]

CLASSIC: Dict[str, Detector] = {
    "hamilton": hamilton_detect,
    "christov": christov_detect,
    "swt": swt_detect,
}
MODEL_DETECTOR = "rpnet"


def registered_names() -> List[str]:
    return sorted(list(CLASSIC) + [MODEL_DETECTOR])


class RPNetDetector:
    """Runs a trained U-Net over a record of any length and rate.

    The record is resampled to the model rate, cut into model-length windows
    (the last one zero-padded), and valleys of the predicted distance map are
    mapped back to source-rate sample indices.
    """

    name = MODEL_DETECTOR

    def __init__(self, model, peak_cfg: PeakExtractionConfig = PeakExtractionConfig(),
                 fs: float = DEFAULT_FS):
        self.model = model
        self.peak_cfg = peak_cfg
        self.fs = fs

    @classmethod
    def from_checkpoint(cls, path: Union[str, Path], **kw) -> "RPNetDetector":
        from ..unet.train import load_model

        return cls(load_model(path), **kw)

    @property
    def input_length(self) -> int:
        return self.model.config.input_length

    def _windows(self, rec: EcgRecord) -> Tuple[List[Window], int]:
        x = resample_linear(rec.samples, rec.fs, self.fs)
        L = self.input_length
        out = []
        for offset in range(0, x.size, L):
            chunk = x[offset : offset + L]
            pad = L - chunk.size
            if pad:
                chunk = np.concatenate([chunk, np.zeros(pad)])
            out.append(Window(chunk, rec.record_id, offset, self.fs, np.zeros(0, np.int64), pad, rec.fs))
        return out, x.size

    def predict(self, rec: EcgRecord) -> Tuple[DetectorOutput, DistanceMap]:
        """Peaks at the record's rate plus the stitched distance map at the model rate."""
        from ..unet.train import peaks_for_window, predict_dt_batch

        windows, n_model = self._windows(rec)
        dts = predict_dt_batch(self.model, windows)
        scale = rec.fs / self.fs
        found = []
        for w, dt in zip(windows, dts):
            local = peaks_for_window(w, dt, self.peak_cfg).sample_indices
            found.append(local + int(round(w.offset * scale)))
        peaks = np.concatenate(found) if found else np.zeros(0, np.int64)
        peaks = np.unique(peaks[(peaks >= 0) & (peaks < len(rec))])
        # duplicates straddling a window seam: keep the earlier one
        min_gap = self.peak_cfg.refractory_ms * rec.fs / 1000.0
        peaks = enforce_refractory(peaks, np.zeros(peaks.size), min_gap)
        values = np.concatenate([dt.values for dt in dts])[:n_model]
        dt_cap = dts[0].cap_samples if dts else DEFAULT_CAP_SAMPLES
        return DetectorOutput(BeatAnnotations(peaks), self.name), DistanceMap(values, dt_cap, self.fs)

    def __call__(self, rec: EcgRecord) -> DetectorOutput:
        return self.predict(rec)[0]

    def predict_window(self, window: Window) -> Tuple[BeatAnnotations, DistanceMap]:
        """Pre-cut window of exactly the checkpoint length; peaks on the window's own grid."""
        from ..unet.train import peaks_for_window, predict_dt_batch

        if len(window) != self.input_length or window.fs != self.fs:
            raise ConfigError(
                f"window has {len(window)} samples at {window.fs} Hz; checkpoint expects "
                f"{self.input_length} samples at {self.fs} Hz")
        dt = predict_dt_batch(self.model, [window])[0]
        return peaks_for_window(replace(window, source_fs=window.fs), dt, self.peak_cfg), dt


def get_detector(name: str, ckpt: Optional[Union[str, Path]] = None) -> Detector:
    """Look up a detector by registered name; ``rpnet`` needs a checkpoint path."""
    if name in CLASSIC:
        return CLASSIC[name]
    if name == MODEL_DETECTOR:
        if ckpt is None:
            raise ConfigError("detector 'rpnet' requires a checkpoint (--ckpt)")
        return RPNetDetector.from_checkpoint(ckpt)
    raise ConfigError(f"unknown detector {name!r}; registered: {', '.join(registered_names())}")


__all__ = [
    "CLASSIC",
    "Detector",
    "DetectorOutput",
    "MODEL_DETECTOR",
    "RPNetDetector",
    "christov_detect",
    "constants",
    "get_detector",
    "hamilton_detect",
    "iswt",
    "registered_names",
    "swt",
    "swt_detect",
]
