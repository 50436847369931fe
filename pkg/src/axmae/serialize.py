"""Self-describing binary container used for checkpoints and caches.

Layout: 4 magic bytes ``AXC1``, a little-endian uint32 header length, a
UTF-8 JSON header, then raw little-endian float32 blobs concatenated in the
order declared by the header's ``blobs`` list (each entry carries ``name``
and ``shape``).
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

__all__ = ["save_container", "load_container", "file_fingerprint"]

_MAGIC = b"AXC1"
_LEN = np.dtype("<u4")
_VALUE = np.dtype("<f4")


def save_container(path, header: dict, blobs) -> None:
    """Write ``blobs`` (iterable of (name, array)) after a JSON header."""
    # asarray with order="C" keeps 0-d shapes, unlike ascontiguousarray
    blobs = [(str(name), np.asarray(arr, dtype=_VALUE, order="C")) for name, arr in blobs]
    head = dict(header)
    head["blobs"] = [{"name": name, "shape": list(arr.shape)} for name, arr in blobs]
    payload = json.dumps(head, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(np.array([len(payload)], dtype=_LEN).tobytes())
        fh.write(payload)
        for _, arr in blobs:
            fh.write(arr.tobytes())


def load_container(path):
    """Read a container; returns (header, {name: float32 array})."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != _MAGIC:
        raise ValueError(f"{path}: not a container file (bad magic)")
    hlen = int(np.frombuffer(blob[4:8], dtype=_LEN)[0])
    if len(blob) < 8 + hlen:
        raise ValueError(f"{path}: truncated header")
    header = json.loads(blob[8:8 + hlen].decode("utf-8"))
    arrays = {}
    offset = 8 + hlen
    for entry in header.get("blobs", []):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * 4
        if end > len(blob):
            raise ValueError(f"{path}: truncated blob {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(blob, dtype=_VALUE, count=count,
                                              offset=offset).reshape(shape).copy()
        offset = end
    if offset != len(blob):
        raise ValueError(f"{path}: {len(blob) - offset} trailing bytes after declared blobs")
    return header, arrays


def file_fingerprint(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
