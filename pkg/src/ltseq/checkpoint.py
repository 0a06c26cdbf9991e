"""Binary parameter checkpoints.

Layout: magic b"LTSQ1", a uint32 little-endian manifest length, a JSON
manifest mapping each name to {shape, offset} (byte offsets into the
payload), then the concatenated little-endian float64 payloads.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"LTSQ1"


def save_checkpoint(path, state: dict[str, np.ndarray]) -> None:
    entries = {}
    payloads = []
    offset = 0
    for name, arr in state.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries[name] = {"shape": list(arr.shape), "offset": offset}
        payloads.append(arr.tobytes())
        offset += arr.nbytes
    manifest = json.dumps({"params": entries}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        for blob in payloads:
            fh.write(blob)


def load_checkpoint(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: not an LTSQ1 checkpoint")
    (mlen,) = struct.unpack_from("<I", raw, len(MAGIC))
    header_end = len(MAGIC) + 4
    try:
        manifest = json.loads(raw[header_end:header_end + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: corrupt checkpoint manifest: {exc}") from exc
    payload = raw[header_end + mlen:]
    state = {}
    for name, entry in manifest["params"].items():
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 8 * count
        if end > len(payload):
            raise DataError(f"{path}: truncated payload for {name!r}")
        arr = np.frombuffer(payload[start:end], dtype="<f8").reshape(shape)
        state[name] = arr.astype(np.float64)
    return state
