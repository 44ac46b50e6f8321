"""Experiment drivers: detector comparison tables and SNR sweeps, plus report I/O."""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import InputError, ParseError
from ..signal_io import BeatAnnotations, EcgRecord
from .matching import DEFAULT_TOL_MS, EvalReport, MatchResult, match_peaks, metrics
from .noise import mix_noise

Labeled = Tuple[EcgRecord, BeatAnnotations]
DetectFn = Callable[[EcgRecord], object]

REPORT_COLUMNS = ("detector", "dataset", "snr_db", "precision", "recall", "f1")
DEFAULT_LEVELS = (24.0, 18.0, 12.0, 6.0, 0.0)
THREADS_ENV = "RPEAKKIT_THREADS"


def worker_count(explicit: Optional[int] = None) -> int:
    """Worker bound from the argument, else ``RPEAKKIT_THREADS``, else 1."""
    if explicit is not None:
        return max(1, int(explicit))
    raw = os.environ.get(THREADS_ENV, "").strip()
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


def _pmap(fn, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _peaks_of(out) -> BeatAnnotations:
    # detectors return DetectorOutput; bare BeatAnnotations are accepted too
    return getattr(out, "peaks", out)


@dataclass
class ReportRow:
    detector: str
    dataset: str
    snr_db: Optional[float]
    report: EvalReport

    def as_dict(self) -> dict:
        return {
            "detector": self.detector,
            "dataset": self.dataset,
            "snr_db": self.snr_db,
            "precision": self.report.precision,
            "recall": self.report.recall,
            "f1": self.report.f1,
        }


@dataclass
class ExperimentReport:
    rows: List[ReportRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def by_detector(self, name: str) -> List[ReportRow]:
        return [r for r in self.rows if r.detector == name]


def evaluate_detector(detect: DetectFn, dataset: Sequence[Labeled], tol_ms: float = DEFAULT_TOL_MS,
                      workers: Optional[int] = None) -> EvalReport:
    """Micro-averaged report; ``per_record`` maps record id to its own counts."""
    def one(item: Labeled):
        rec, ref = item
        return rec.record_id, match_peaks(_peaks_of(detect(rec)), ref, rec.fs, tol_ms)

    results = _pmap(one, list(dataset), worker_count(workers))
    total = MatchResult(0, 0, 0)
    per_record = {}
    for rid, mr in results:
        total = total + mr
        per_record[rid] = metrics(mr).row()
    rep = metrics(total)
    rep.per_record = per_record
    return rep


def compare_detectors(dataset: Sequence[Labeled], detectors: Mapping[str, DetectFn],
                      dataset_name: str = "dataset", tol_ms: float = DEFAULT_TOL_MS,
                      workers: Optional[int] = None) -> ExperimentReport:
    if not dataset:
        raise InputError("compare_detectors needs at least one annotated record")
    out = ExperimentReport()
    for name, detect in detectors.items():
        out.rows.append(ReportRow(name, dataset_name, None, evaluate_detector(detect, dataset, tol_ms, workers)))
    return out


def snr_sweep(detect: DetectFn, clean: Sequence[Labeled], noise: Sequence[np.ndarray],
              levels: Sequence[float] = DEFAULT_LEVELS, detector_name: str = "detector",
              dataset_name: str = "synthetic", tol_ms: float = DEFAULT_TOL_MS,
              workers: Optional[int] = None) -> ExperimentReport:
    """Mix each clean record with its noise sequence at every level and evaluate.

    Record ``i`` uses ``noise[i % len(noise)]`` at every level, so levels differ
    only in the mixing gain.
    """
    out = ExperimentReport()
    if len(levels) == 0:
        return out
    if not clean:
        raise InputError("snr_sweep needs at least one clean annotated record")
    if not noise:
        raise InputError("snr_sweep needs at least one noise sequence")
    for snr in levels:
        mixed = [(mix_noise(rec, noise[i % len(noise)], float(snr)), ref)
                 for i, (rec, ref) in enumerate(clean)]
        rep = evaluate_detector(detect, mixed, tol_ms, workers)
        out.rows.append(ReportRow(detector_name, dataset_name, float(snr), rep))
    return out


def merge(*reports: ExperimentReport) -> ExperimentReport:
    return ExperimentReport([row for rep in reports for row in rep.rows])


# --------------------------------------------------------------------------- report files


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report_csv(path: Union[str, Path], report: ExperimentReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in report.rows:
            d = row.as_dict()
            w.writerow([_fmt(d[c]) for c in REPORT_COLUMNS])


def read_report_csv(path: Union[str, Path]) -> List[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
            raise ParseError(f"{path}: expected columns {','.join(REPORT_COLUMNS)}")
        for r in reader:
            rows.append({
                "detector": r["detector"],
                "dataset": r["dataset"],
                "snr_db": float(r["snr_db"]) if r["snr_db"] else None,
                "precision": float(r["precision"]),
                "recall": float(r["recall"]),
                "f1": float(r["f1"]),
            })
    return rows


def report_to_json(report: ExperimentReport) -> dict:
    rows = []
    for row in report.rows:
        d = row.as_dict()
        d.update(tp=row.report.tp, fp=row.report.fp, fn=row.report.fn,
                 per_record=row.report.per_record)
        rows.append(d)
    return {"rows": rows}


def write_report_json(path: Union[str, Path], report: ExperimentReport) -> None:
    Path(path).write_text(json.dumps(report_to_json(report), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def write_per_record_csv(path: Union[str, Path], report: ExperimentReport) -> None:
    cols = ("detector", "dataset", "snr_db", "record_id", "tp", "fp", "fn", "precision", "recall", "f1")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in report.rows:
            for rid in sorted(row.report.per_record):
                d = dict(row.report.per_record[rid], detector=row.detector, dataset=row.dataset,
                         snr_db=row.snr_db, record_id=rid)
                w.writerow([_fmt(d[c]) for c in cols])


def format_table(report: ExperimentReport) -> str:
    """Fixed-width text table, one row per detector (and SNR level when present)."""
    head = f"{'detector':<10} {'dataset':<14} {'snr_db':>7} {'precision':>9} {'recall':>9} {'f1':>9}"
    lines = [head, "-" * len(head)]
    for row in report.rows:
        snr = "" if row.snr_db is None else f"{row.snr_db:g}"
        r = row.report
        lines.append(f"{row.detector:<10} {row.dataset:<14} {snr:>7} "
                     f"{r.precision:>9.4f} {r.recall:>9.4f} {r.f1:>9.4f}")
    return "\n".join(lines)
