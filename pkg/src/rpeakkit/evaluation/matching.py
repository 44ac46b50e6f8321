"""Tolerance-window matching of detected beats against reference beats."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from ..errors import InputError
from ..signal_io import BeatAnnotations

DEFAULT_TOL_MS = 75.0


@dataclass
class MatchResult:
    tp: int
    fp: int
    fn: int
    pairs: List[Tuple[int, int]] = field(default_factory=list)

    def __add__(self, other: "MatchResult") -> "MatchResult":
        return MatchResult(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn,
                           self.pairs + other.pairs)


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0
    per_record: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "tp": self.tp, "fp": self.fp, "fn": self.fn}


def _indices(x) -> np.ndarray:
    if isinstance(x, BeatAnnotations):
        return x.sample_indices
    return np.asarray(x, dtype=np.int64).reshape(-1)


def match_peaks(pred, ref, fs: float, tol_ms: float = DEFAULT_TOL_MS) -> MatchResult:
    """One-to-one matching with |pred - ref| <= tol_ms * fs / 1000.

    References are visited in order and each claims the earliest unclaimed
    prediction inside its window. Since every window has the same width, a
    prediction left behind by one reference can never be reached by a later
    one, so this greedy choice yields a maximum-cardinality matching.
    """
    p, r = _indices(pred), _indices(ref)
    if np.any(np.diff(p) < 0) or np.any(np.diff(r) < 0):
        raise InputError("match_peaks expects sorted peak sequences")
    tol = tol_ms * fs / 1000.0
    pairs = []
    j = 0
    for ref_idx in r.tolist():
        while j < p.size and p[j] < ref_idx - tol:
            j += 1
        if j < p.size and p[j] <= ref_idx + tol:
            pairs.append((int(p[j]), ref_idx))
            j += 1
    tp = len(pairs)
    return MatchResult(tp, int(p.size) - tp, int(r.size) - tp, pairs)


def metrics(mr: MatchResult) -> EvalReport:
    """Precision, recall and F1; an empty-vs-empty comparison scores 1.0 everywhere."""
    tp, fp, fn = mr.tp, mr.fp, mr.fn
    if tp + fp == 0 and tp + fn == 0:
        return EvalReport(1.0, 1.0, 1.0, tp, fp, fn)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(precision, recall, f1, tp, fp, fn)

