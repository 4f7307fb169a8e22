"""Versioned binary container of named float64 arrays.

Layout (all integers little-endian)::

    magic    8 bytes  b"TEX3DCKP"
    version  uint32
    hlen     uint32   length of the JSON header in bytes
    header   hlen bytes of UTF-8 JSON:
             {"arrays": [{"name", "shape", "offset"}...], "meta": {...}}
    payload  concatenated '<f8' data, arrays in sorted-name order,
             offsets counted in bytes from the start of the payload
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"TEX3DCKP"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries, blobs, offset = [], [], 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name], dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        blobs.append(a.tobytes())
        offset += a.nbytes
    header = json.dumps({"arrays": entries, "meta": meta or {}}, sort_keys=True,
                        separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16 or raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack("<II", raw[8:16])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    try:
        header = json.loads(raw[16:16 + hlen].decode("utf-8"))
        entries, meta = header["arrays"], header["meta"]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    payload = memoryview(raw)[16 + hlen:]
    arrays = {}
    for e in entries:
        count = int(np.prod(e["shape"], dtype=np.int64))
        if e["offset"] + 8 * count > len(payload):
            raise CheckpointError(f"{path}: truncated payload for array {e['name']!r}")
        a = np.frombuffer(payload, dtype="<f8", count=count, offset=e["offset"])
        arrays[e["name"]] = a.reshape(e["shape"]).astype(np.float64)
    return arrays, meta
