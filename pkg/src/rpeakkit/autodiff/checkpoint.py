"""Versioned binary checkpoint of named float64 tensors.

Layout::

    b"RPKCKPT\\0"                 8-byte magic
    uint32 little-endian         format version
    uint32 little-endian         manifest length in bytes
    manifest                     UTF-8 JSON: [{"name", "shape", "offset", "count"}, ...]
    payload                      row-major little-endian float64 values

The writer is deterministic: identical tensors produce identical bytes.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

from ..errors import ParseError, ShapeError

MAGIC = b"RPKCKPT\0"
VERSION = 1


def dumps(tensors: Mapping[str, np.ndarray]) -> bytes:
    entries, chunks, offset = [], [], 0
    for name, arr in tensors.items():
        values = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(values.shape),
                        "offset": offset, "count": int(values.size)})
        chunks.append(values.tobytes())
        offset += values.size
    manifest = json.dumps(entries, separators=(",", ":")).encode("utf-8")
    header = MAGIC + struct.pack("<II", VERSION, len(manifest))
    return header + manifest + b"".join(chunks)


def loads(blob: bytes) -> Dict[str, np.ndarray]:
    if blob[:8] != MAGIC:
        raise ParseError("not an rpeakkit checkpoint (bad magic)")
    version, mlen = struct.unpack("<II", blob[8:16])
    if version != VERSION:
        raise ParseError(f"unsupported checkpoint version {version}")
    try:
        entries = json.loads(blob[16 : 16 + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"corrupt checkpoint manifest: {exc}") from exc
    payload = np.frombuffer(blob, dtype="<f8", offset=16 + mlen)
    out = {}
    for e in entries:
        start, count = e["offset"], e["count"]
        if start + count > payload.size:
            raise ParseError(f"checkpoint truncated at tensor {e['name']!r}")
        out[e["name"]] = payload[start : start + count].reshape(e["shape"]).astype(np.float64)
    return out


def save(path: Union[str, Path], tensors: Mapping[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(tensors))


def load(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())


def assign(target: Mapping[str, np.ndarray], loaded: Mapping[str, np.ndarray]) -> None:
    """Copy ``loaded`` into the arrays of ``target``, rejecting any mismatch."""
    missing = sorted(set(target) - set(loaded))
    extra = sorted(set(loaded) - set(target))
    if missing or extra:
        raise ShapeError(f"checkpoint names differ: missing={missing[:5]} unexpected={extra[:5]}")
    for name, arr in target.items():
        src = loaded[name]
        if src.shape != arr.shape:
            raise ShapeError(f"shape mismatch for {name!r}: checkpoint {src.shape}, model {arr.shape}")
    for name, arr in target.items():
        arr[...] = loaded[name]
