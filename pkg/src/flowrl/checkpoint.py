"""Versioned single-file checkpoints.

Layout:  magic | version u32 | manifest length u64 | manifest JSON |
         raw array payload | sha256 digest of everything before it.

The manifest holds JSON-able metadata plus dtype/shape/offset for every
array, written in sorted name order; serialization is fully deterministic,
so saving the same state twice produces byte-identical files.  Any
truncation, magic/version mismatch, or digest mismatch raises instead of
silently loading garbage.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"FLOWRLCKPT"
VERSION = 1


def save_checkpoint(path, meta: dict, arrays: dict) -> None:
    entries = []
    payload = bytearray()
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype=np.float64)
        entries.append({"name": name, "dtype": "<f8", "shape": list(arr.shape),
                        "offset": len(payload), "nbytes": arr.nbytes})
        payload.extend(arr.tobytes())

    manifest = json.dumps({"meta": meta, "arrays": entries}, sort_keys=True).encode()
    blob = bytearray()
    blob.extend(MAGIC)
    blob.extend(struct.pack("<I", VERSION))
    blob.extend(struct.pack("<Q", len(manifest)))
    blob.extend(manifest)
    blob.extend(payload)
    blob.extend(hashlib.sha256(bytes(blob)).digest())

    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(bytes(blob))
    tmp.replace(path)


def load_checkpoint(path) -> tuple[dict, dict]:
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 4 + 8 + 32:
        raise ValueError(f"{path}: truncated checkpoint")
    if blob[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a flowrl checkpoint")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ValueError(f"{path}: checkpoint corrupt (digest mismatch)")

    pos = len(MAGIC)
    (version,) = struct.unpack_from("<I", body, pos)
    pos += 4
    if version != VERSION:
        raise ValueError(f"{path}: checkpoint format version {version}, expected {VERSION}")
    (mlen,) = struct.unpack_from("<Q", body, pos)
    pos += 8
    manifest = json.loads(body[pos: pos + mlen].decode())
    pos += mlen

    arrays = {}
    for entry in manifest["arrays"]:
        start = pos + entry["offset"]
        end = start + entry["nbytes"]
        if end > len(body):
            raise ValueError(f"{path}: checkpoint corrupt (array out of range)")
        arr = np.frombuffer(body[start:end], dtype=entry["dtype"]).reshape(entry["shape"])
        arrays[entry["name"]] = arr.copy()
    return manifest["meta"], arrays
