"""Training loop, inference helpers and cross-validation splits for the U-Net."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..autodiff import checkpoint
from ..autodiff.functional import smooth_l1
from ..autodiff.optim import AdamState, adam_step, lr_at
from ..autodiff.tensor import Tensor
from ..dtmap import (DEFAULT_CAP_SAMPLES, DistanceMap, PeakExtractionConfig, downsample_dt,
                     dt_from_peaks, peaks_from_dt)
from ..errors import ConfigError, InputError, NumericsError, ShapeError
from ..signal_io import BeatAnnotations, Window, rescale_annotations
from .model import IncResUNet, ModelConfig, build

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 16
    seed: int = 0
    base_lr: float = 0.05
    lr_decay: float = 0.1
    lr_step_epochs: int = 150
    checkpoint_every: int = 0
    checkpoint_dir: Optional[str] = None
    val_every: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    def lr(self, epoch: int) -> float:
        return lr_at(epoch, self.base_lr, self.lr_decay, self.lr_step_epochs)


@dataclass
class EpochLog:
    epoch: int
    lr: float
    mean_loss: float
    val_f1: Optional[float] = None


@dataclass
class TrainLog:
    epochs: List[EpochLog] = field(default_factory=list)

    @property
    def losses(self) -> List[float]:
        return [e.mean_loss for e in self.epochs]

    def write_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "lr", "mean_loss", "val_f1"])
            for e in self.epochs:
                w.writerow([e.epoch, repr(e.lr), repr(e.mean_loss),
                            "" if e.val_f1 is None else repr(e.val_f1)])


def read_train_log(path: Union[str, Path]) -> TrainLog:
    out = TrainLog()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.epochs.append(EpochLog(int(row["epoch"]), float(row["lr"]), float(row["mean_loss"]),
                                       float(row["val_f1"]) if row["val_f1"] else None))
    return out


def normalize_window(x: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-variance scaling of one window (flat windows only centred)."""
    x = np.asarray(x, dtype=np.float64)
    centred = x - x.mean()
    std = centred.std()
    return centred / std if std > 1e-12 else centred


def _stack_inputs(windows: Sequence[np.ndarray]) -> np.ndarray:
    return np.stack([normalize_window(w) for w in windows])[:, None, :]


def make_targets(windows: Sequence[Window], cap_samples: int = DEFAULT_CAP_SAMPLES) -> List[DistanceMap]:
    return [dt_from_peaks(w.peak_indices, len(w), cap_samples, w.fs) for w in windows]


def fit(
    model: IncResUNet,
    dataset: Sequence[Tuple[Window, DistanceMap]],
    tc: TrainConfig,
    validation: Optional[Sequence[Window]] = None,
    peak_cfg: PeakExtractionConfig = PeakExtractionConfig(),
    on_epoch: Optional[Callable[[EpochLog], None]] = None,
) -> TrainLog:
    """Minibatch Adam on mean SmoothL1 between predicted and target distance maps."""
    if not dataset:
        raise InputError("empty training set")
    L = model.config.input_length
    xs, ys = [], []
    for win, dt in dataset:
        if len(win) != L or len(dt) != L:
            raise ShapeError(f"training pair length {len(win)}/{len(dt)} != model input {L}")
        if dt.values.min() < 0 or dt.values.max() > 1:
            raise InputError("distance-map targets must lie in [0, 1]")
        xs.append(win.samples)
        ys.append(dt.values)
    X = _stack_inputs(xs)
    Y = np.stack(ys)[:, None, :]

    rng = np.random.default_rng(tc.seed)
    params = model.parameters()
    state = AdamState(lr=tc.lr(0))
    ckpt_dir = Path(tc.checkpoint_dir) if tc.checkpoint_dir else None
    last_good = {k: v.copy() for k, v in model.state_arrays().items()}
    history = TrainLog()

    for epoch in range(tc.epochs):
        model.train()
        state.lr = tc.lr(epoch)
        order = rng.permutation(len(X))
        total, count = 0.0, 0
        for start in range(0, len(order), tc.batch_size):
            idx = order[start : start + tc.batch_size]
            model.zero_grad()
            loss = smooth_l1(model(Tensor(X[idx])), Y[idx])
            value = loss.item()
            if not np.isfinite(value):
                raise NumericsError(f"non-finite loss at epoch {epoch}", last_good)
            loss.backward()
            adam_step({k: p.data for k, p in params.items()},
                      {k: p.grad for k, p in params.items()}, state)
            total += value * len(idx)
            count += len(idx)

        entry = EpochLog(epoch, state.lr, total / count)
        if validation and tc.val_every and (epoch + 1) % tc.val_every == 0:
            entry.val_f1 = evaluate_windows(model, validation, peak_cfg)
        history.epochs.append(entry)
        log.debug("epoch %d lr %.2e loss %.6f", epoch, entry.lr, entry.mean_loss)
        if on_epoch is not None:
            on_epoch(entry)
        if tc.checkpoint_every and (epoch + 1) % tc.checkpoint_every == 0:
            last_good = {k: v.copy() for k, v in model.state_arrays().items()}
            if ckpt_dir is not None:
                save_model(model, ckpt_dir / "checkpoint.ckpt")
    model.eval()
    return history


def predict_dt_batch(model: IncResUNet, windows: Sequence[Window], batch_size: int = 16) -> List[DistanceMap]:
    model.eval()
    L = model.config.input_length
    out = []
    for start in range(0, len(windows), batch_size):
        chunk = windows[start : start + batch_size]
        for w in chunk:
            if len(w) != L:
                raise ShapeError(f"window length {len(w)} != model input length {L}")
        y = model(Tensor(_stack_inputs([w.samples for w in chunk]))).data
        out.extend(DistanceMap(y[i, 0].copy(), DEFAULT_CAP_SAMPLES, chunk[i].fs) for i in range(len(chunk)))
    return out


def peaks_for_window(window: Window, dt: DistanceMap,
                     cfg: PeakExtractionConfig = PeakExtractionConfig()) -> BeatAnnotations:
    """Valley extraction at the window's source rate, ignoring any zero-padded tail."""
    src = window.source_fs or window.fs
    valid = len(window) - window.padding
    if src < window.fs:
        dt = downsample_dt(dt, src)
        peaks = peaks_from_dt(dt, cfg)
        valid = int(round(valid * src / window.fs))
    else:
        peaks = peaks_from_dt(dt, cfg)
        if src > window.fs:
            peaks = rescale_annotations(peaks, window.fs, src)
            valid = int(round(valid * src / window.fs))
    idx = peaks.sample_indices
    return BeatAnnotations(idx[idx < valid])


def reference_at_source(window: Window) -> BeatAnnotations:
    """The window's annotations (stored at ``window.fs``) mapped to its source rate."""
    ref = BeatAnnotations(window.peak_indices)
    if window.source_fs and window.source_fs != window.fs:
        ref = rescale_annotations(ref, window.fs, window.source_fs)
    return ref


def predict_peaks(model: IncResUNet, window: Window,
                  cfg: PeakExtractionConfig = PeakExtractionConfig()) -> BeatAnnotations:
    dt = predict_dt_batch(model, [window])[0]
    return peaks_for_window(window, dt, cfg)


def evaluate_windows(model: IncResUNet, windows: Sequence[Window],
                     cfg: PeakExtractionConfig = PeakExtractionConfig(), tol_ms: float = 75.0) -> float:
    """Micro-averaged F1 of the model's peaks against each window's annotations."""
    from ..evaluation.matching import MatchResult, match_peaks, metrics

    total = MatchResult(0, 0, 0)
    for w, dt in zip(windows, predict_dt_batch(model, windows)):
        total = total + match_peaks(peaks_for_window(w, dt, cfg), reference_at_source(w),
                                    w.source_fs, tol_ms)
    return metrics(total).f1


def kfold_split(n_items: int, k: int = 3, seed: int = 0) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Seeded k-fold partition; returns (train_idx, val_idx) per fold."""
    if k < 2:
        raise ConfigError("k must be >= 2")
    if k > n_items:
        raise ConfigError(f"cannot split {n_items} items into {k} folds")
    perm = np.random.default_rng(seed).permutation(n_items)
    folds = [np.sort(f) for f in np.array_split(perm, k)]
    out = []
    for i in range(k):
        train = np.sort(np.concatenate([folds[j] for j in range(k) if j != i]))
        out.append((train, folds[i]))
    return out


# --------------------------------------------------------------------------- persistence


def save_model(model: IncResUNet, path: Union[str, Path]) -> None:
    """Write the checkpoint plus a ``.json`` sidecar holding the ModelConfig."""
    path = Path(path)
    checkpoint.save(path, model.state_arrays())
    sidecar = {"format_version": checkpoint.VERSION, "model_config": model.config.to_dict()}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")


def load_model(path: Union[str, Path], config: Optional[ModelConfig] = None) -> IncResUNet:
    path = Path(path)
    if config is None:
        sidecar = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
        config = ModelConfig.from_dict(sidecar["model_config"])
    model = build(config, seed=0)
    checkpoint.assign(model.state_arrays(), checkpoint.load(path))
    return model.eval()
