"""1-D Inception-Residual U-Net regressing the R-peak distance transform."""
from .model import IncResUNet, ModelConfig, build, channels_at, forward, length_trace
from .train import (TrainConfig, TrainLog, evaluate_windows, fit, kfold_split, load_model,
                    make_targets, predict_dt_batch, predict_peaks, save_model)

__all__ = [
    "IncResUNet",
    "ModelConfig",
    "TrainConfig",
    "TrainLog",
    "build",
    "channels_at",
    "evaluate_windows",
    "fit",
    "forward",
    "kfold_split",
    "length_trace",
    "load_model",
    "make_targets",
    "predict_dt_batch",
    "predict_peaks",
    "save_model",
]
