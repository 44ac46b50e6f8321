"""ECG record ingestion: WFDB-style headers, format 212/16 signals, CSV beats, windowing."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, InputError, ParseError, RangeError, UnsupportedFormat

SUPPORTED_FORMATS = (212, 16)
DEFAULT_GAIN = 200.0

# WFDB annotation codes that do not mark a heartbeat
NON_BEAT_LABELS = frozenset(
    ["[", "]", "!", "x", "(", ")", "p", "t", "u", "`", "'", "^", "|", "~", "+", "s", "T",
     "*", "D", "=", '"', "@"])


@dataclass
class EcgRecord:
    record_id: str
    samples: np.ndarray
    fs: float
    lead_name: str = ""
    units: str = "mV"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if not self.fs > 0:
            raise InputError(f"sampling rate must be positive, got {self.fs}")
        if self.samples.size == 0:
            raise InputError(f"record {self.record_id!r} has no samples")
        if not np.all(np.isfinite(self.samples)):
            raise InputError(f"record {self.record_id!r} contains non-finite samples")

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.fs


@dataclass
class BeatAnnotations:
    sample_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        idx = np.asarray(self.sample_indices, dtype=np.int64).reshape(-1)
        if idx.size and (idx[0] < 0 or np.any(np.diff(idx) <= 0)):
            raise InputError("beat indices must be non-negative and strictly increasing")
        self.sample_indices = idx

    def __len__(self):
        return self.sample_indices.size

    def __iter__(self):
        return iter(self.sample_indices.tolist())

    def tolist(self) -> List[int]:
        return self.sample_indices.tolist()


@dataclass
class SignalSpec:
    file_name: str
    fmt: int
    gain: float = DEFAULT_GAIN
    baseline: int = 0
    units: str = "mV"
    description: str = ""


@dataclass
class RecordMeta:
    name: str
    n_signals: int
    fs: float
    n_samples: int
    signals: List[SignalSpec] = field(default_factory=list)

    @property
    def gain(self) -> float:
        return self.signals[0].gain

    @property
    def baseline(self) -> int:
        return self.signals[0].baseline

    @property
    def fmt(self) -> int:
        return self.signals[0].fmt


@dataclass
class Window:
    samples: np.ndarray
    source_record_id: str
    offset: int
    fs: float
    peak_indices: np.ndarray
    padding: int = 0
    # rate the window was recorded at before resampling to ``fs``
    source_fs: Optional[float] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.peak_indices = np.asarray(self.peak_indices, dtype=np.int64)
        if self.source_fs is None:
            self.source_fs = self.fs
        n = self.samples.size
        if self.peak_indices.size and (self.peak_indices.min() < 0 or self.peak_indices.max() >= n):
            raise InputError("window peak indices fall outside the window")

    def __len__(self):
        return self.samples.size

    @property
    def record_id(self) -> str:
        return f"{self.source_record_id}@{self.offset}"


# --------------------------------------------------------------------------- header


def _parse_fs(token: str) -> float:
    # "360", "360/100" (counter freq), "250(0)"
    head = token.split("/")[0].split("(")[0]
    return float(head)


def parse_header(text: str) -> RecordMeta:
    """Parse a WFDB-style header: record line, then one line per signal."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ParseError("empty header")
    head = lines[0].split()
    if len(head) < 2:
        raise ParseError(f"malformed record line: {lines[0]!r}")
    try:
        name = head[0].split("/")[0]
        n_signals = int(head[1])
        fs = _parse_fs(head[2]) if len(head) > 2 else 250.0
        n_samples = int(head[3]) if len(head) > 3 else 0
    except ValueError as exc:
        raise ParseError(f"malformed record line: {lines[0]!r}") from exc
    if n_signals < 1 or fs <= 0 or n_samples < 0:
        raise ParseError(f"invalid record line values: {lines[0]!r}")
    if len(lines) - 1 < n_signals:
        raise ParseError(f"header declares {n_signals} signals but has {len(lines) - 1} signal lines")

    signals = [_parse_signal_line(ln) for ln in lines[1 : 1 + n_signals]]
    return RecordMeta(name, n_signals, fs, n_samples, signals)


def _parse_signal_line(line: str) -> SignalSpec:
    parts = line.split()
    if len(parts) < 2:
        raise ParseError(f"malformed signal line: {line!r}")
    fmt_token = parts[1]
    digits = ""
    for ch in fmt_token:
        if not ch.isdigit():
            break
        digits += ch
    if not digits:
        raise ParseError(f"missing format code in {line!r}")
    fmt = int(digits)
    if fmt not in SUPPORTED_FORMATS:
        raise UnsupportedFormat(f"format {fmt} not supported (only {SUPPORTED_FORMATS})")

    gain, baseline, units, has_baseline = DEFAULT_GAIN, 0, "mV", False
    if len(parts) > 2:
        gtok = parts[2]
        if "/" in gtok:
            gtok, units = gtok.split("/", 1)
        if "(" in gtok:
            gtok, btok = gtok.split("(", 1)
            baseline = int(btok.rstrip(")"))
            has_baseline = True
        try:
            gain = float(gtok) or DEFAULT_GAIN
        except ValueError as exc:
            raise ParseError(f"bad gain field in {line!r}") from exc
    # without an explicit baseline the ADC zero (field 5) is used
    if not has_baseline and len(parts) > 4:
        try:
            baseline = int(parts[4])
        except ValueError:
            pass
    description = " ".join(parts[8:]) if len(parts) > 8 else ""
    return SignalSpec(parts[0], fmt, gain, baseline, units, description)


# --------------------------------------------------------------------------- binary formats


class Fmt212Bytes(bytes):
    """Encoded format-212 payload; ``padding`` counts zero samples appended."""

    padding: int = 0


def decode_fmt212(data: bytes, n_samples_total: int) -> np.ndarray:
    """Unpack pairs of 12-bit two's-complement samples stored in 3 bytes."""
    need = math.ceil(n_samples_total * 1.5)
    if len(data) < need:
        raise ParseError(f"format-212 buffer has {len(data)} bytes, need {need}")
    n_pairs = (n_samples_total + 1) // 2
    buf = bytes(data[: 3 * n_pairs])
    buf += b"\0" * (3 * n_pairs - len(buf))
    raw = np.frombuffer(buf, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
    a = raw[:, 0] | ((raw[:, 1] & 0x0F) << 8)
    b = raw[:, 2] | ((raw[:, 1] & 0xF0) << 4)
    out = np.empty(2 * n_pairs, dtype=np.int32)
    out[0::2] = a
    out[1::2] = b
    out[out > 2047] -= 4096
    return out[:n_samples_total].astype(np.int64)


def encode_fmt212(values: Sequence[int]) -> Fmt212Bytes:
    v = np.asarray(values, dtype=np.int64).reshape(-1)
    if v.size and (v.min() < -2048 or v.max() > 2047):
        raise RangeError("format 212 holds values in [-2048, 2047]")
    padding = v.size % 2
    if padding:
        v = np.append(v, 0)
    u = (v & 0xFFF).reshape(-1, 2)
    packed = np.empty((u.shape[0], 3), dtype=np.uint8)
    packed[:, 0] = u[:, 0] & 0xFF
    packed[:, 1] = ((u[:, 0] >> 8) & 0x0F) | ((u[:, 1] >> 4) & 0xF0)
    packed[:, 2] = u[:, 1] & 0xFF
    out = Fmt212Bytes(packed.tobytes())
    out.padding = padding
    return out


def decode_fmt16(data: bytes, n_samples_total: int) -> np.ndarray:
    need = 2 * n_samples_total
    if len(data) < need:
        raise ParseError(f"format-16 buffer has {len(data)} bytes, need {need}")
    return np.frombuffer(data[:need], dtype="<i2").astype(np.int64)


def adc_to_mv(raw, gain: float, baseline: int) -> np.ndarray:
    if gain == 0:
        raise ConfigError("ADC gain must be non-zero")
    return (np.asarray(raw, dtype=np.float64) - baseline) / gain


def read_record(header_path: Union[str, Path], lead: int = 0) -> EcgRecord:
    """Load one lead of a WFDB record whose signals share a single data file."""
    header_path = Path(header_path)
    meta = parse_header(header_path.read_text(encoding="utf-8"))
    if not 0 <= lead < meta.n_signals:
        raise ConfigError(f"lead {lead} not in record with {meta.n_signals} signals")
    files = {s.file_name for s in meta.signals}
    if len(files) != 1 or len({s.fmt for s in meta.signals}) != 1:
        raise UnsupportedFormat("signals split across files or formats are not supported")
    data = (header_path.parent / meta.signals[0].file_name).read_bytes()

    n_total = meta.n_samples * meta.n_signals
    if meta.fmt == 212:
        if not n_total:
            n_total = (len(data) * 2 // 3) // meta.n_signals * meta.n_signals
        raw = decode_fmt212(data, n_total)
    else:
        if not n_total:
            n_total = len(data) // 2 // meta.n_signals * meta.n_signals
        raw = decode_fmt16(data, n_total)
    frames = raw.reshape(-1, meta.n_signals)
    spec = meta.signals[lead]
    samples = adc_to_mv(frames[:, lead], spec.gain, spec.baseline)
    return EcgRecord(meta.name, samples, meta.fs, spec.description or f"lead{lead}", spec.units)


# --------------------------------------------------------------------------- annotations


def parse_annotation_csv(text: str, non_beat: Iterable[str] = NON_BEAT_LABELS) -> BeatAnnotations:
    """Read ``sample_index,label`` lines, keeping beats only (sorted, deduplicated)."""
    skip = set(non_beat)
    keep = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        try:
            idx = int(fields[0])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: non-integer sample index {fields[0]!r}") from exc
        if idx < 0:
            raise ParseError(f"line {lineno}: negative sample index")
        label = fields[1] if len(fields) > 1 and fields[1] else "N"
        if label not in skip:
            keep.add(idx)
    return BeatAnnotations(np.array(sorted(keep), dtype=np.int64))


def write_annotation_csv(ann: BeatAnnotations, label: str = "N") -> str:
    return "".join(f"{i},{label}\n" for i in ann.tolist())


PEAK_TABLE_COLUMNS = ("record_id", "detector", "peaks")


def write_peak_table(path: Union[str, Path], rows: Iterable[Tuple[str, str, Sequence[int]]]) -> None:
    """One line per record: ``record_id,detector,peaks`` with peaks space-separated.

    The wide layout keeps records with no detections visible to readers.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PEAK_TABLE_COLUMNS)
        for rid, det, peaks in rows:
            w.writerow([rid, det, " ".join(str(int(p)) for p in peaks)])


def read_peak_table(path: Union[str, Path]) -> Dict[str, Tuple[str, BeatAnnotations]]:
    """Inverse of :func:`write_peak_table`: record id -> (detector, peaks)."""
    out: Dict[str, Tuple[str, BeatAnnotations]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != PEAK_TABLE_COLUMNS:
            raise ParseError(f"{path}: expected header {','.join(PEAK_TABLE_COLUMNS)}")
        for lineno, row in enumerate(reader, 2):
            try:
                idx = np.array([int(t) for t in row["peaks"].split()], dtype=np.int64)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad peak list") from exc
            if row["record_id"] in out:
                raise ParseError(f"{path}:{lineno}: duplicate record id {row['record_id']!r}")
            out[row["record_id"]] = (row["detector"], BeatAnnotations(idx))
    return out


# --------------------------------------------------------------------------- resampling & windows


def resample_linear(x, fs_in: float, fs_out: float) -> np.ndarray:
    """Linear-interpolation resampling; output sample j sits at time j / fs_out."""
    x = np.asarray(x, dtype=np.float64)
    if fs_in <= 0 or fs_out <= 0:
        raise ConfigError("sampling rates must be positive")
    if x.size < 2:
        raise InputError("resampling needs at least two samples")
    if fs_in == fs_out:
        return x.copy()
    n_out = int(round(x.size * fs_out / fs_in))
    positions = np.arange(n_out) * (fs_in / fs_out)
    return np.interp(positions, np.arange(x.size), x)


def rescale_annotations(ann: BeatAnnotations, fs_in: float, fs_out: float) -> BeatAnnotations:
    if fs_in <= 0 or fs_out <= 0:
        raise ConfigError("sampling rates must be positive")
    # round half to even, like Python's round(): 50.5 -> 50
    scaled = np.rint(ann.sample_indices * (fs_out / fs_in)).astype(np.int64)
    if scaled.size:
        keep = np.ones(scaled.size, dtype=bool)
        keep[1:] = scaled[1:] > scaled[:-1]
        scaled = scaled[keep]
    return BeatAnnotations(scaled)


def window_length(win_seconds: float, fs: float) -> int:
    length = win_seconds * fs
    n = int(round(length))
    if n < 1 or abs(length - n) > 1e-9 * max(1.0, length):
        raise ConfigError(f"{win_seconds} s at {fs} Hz is not a whole number of samples")
    return n


def window_record(rec: EcgRecord, ann: BeatAnnotations, win_seconds: float = 10.0,
                  drop_partial: bool = True, source_fs: Optional[float] = None) -> List[Window]:
    """Cut consecutive non-overlapping windows; a kept partial window is zero-padded."""
    L = window_length(win_seconds, rec.fs)
    peaks = ann.sample_indices
    out = []
    for offset in range(0, len(rec), L):
        chunk = rec.samples[offset : offset + L]
        padding = L - chunk.size
        if padding and drop_partial:
            break
        if padding:
            chunk = np.concatenate([chunk, np.zeros(padding)])
        local = peaks[(peaks >= offset) & (peaks < offset + L - padding)] - offset
        out.append(Window(chunk, rec.record_id, offset, rec.fs, local, padding, source_fs))
    return out


# --------------------------------------------------------------------------- canonical JSON


def record_to_json(rec: EcgRecord, peaks: Optional[BeatAnnotations] = None, **extra) -> dict:
    d = {
        "record_id": rec.record_id,
        "fs": rec.fs,
        "lead_name": rec.lead_name,
        "samples": rec.samples.tolist(),
        "peaks": [] if peaks is None else peaks.tolist(),
    }
    d.update(extra)
    return d


def window_to_json(win: Window, lead_name: str = "") -> dict:
    return {
        "record_id": win.record_id,
        "fs": win.fs,
        "lead_name": lead_name,
        "samples": win.samples.tolist(),
        "peaks": win.peak_indices.tolist(),
        "source_record_id": win.source_record_id,
        "offset": win.offset,
        "padding": win.padding,
        "source_fs": win.source_fs,
    }


def record_from_json(d: dict):
    """Inverse of :func:`record_to_json` -> (EcgRecord, BeatAnnotations)."""
    try:
        rec = EcgRecord(str(d["record_id"]), np.asarray(d["samples"], dtype=np.float64),
                        float(d["fs"]), d.get("lead_name", ""))
        ann = BeatAnnotations(np.asarray(d.get("peaks", []), dtype=np.int64))
    except KeyError as exc:
        raise ParseError(f"canonical record missing field {exc}") from exc
    return rec, ann


def window_from_json(d: dict) -> Window:
    return Window(np.asarray(d["samples"], dtype=np.float64),
                  d.get("source_record_id", d["record_id"]), int(d.get("offset", 0)),
                  float(d["fs"]), np.asarray(d.get("peaks", []), dtype=np.int64),
                  int(d.get("padding", 0)), d.get("source_fs"))


def save_dataset(path: Union[str, Path], records: List[dict]) -> None:
    Path(path).write_text(json.dumps({"records": records}, sort_keys=True), encoding="utf-8")


def load_dataset(path: Union[str, Path]) -> List[dict]:
    path = Path(path)
    if path.is_dir():
        path = path / "dataset.json"
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    records = payload["records"] if isinstance(payload, dict) else payload
    return list(records)
