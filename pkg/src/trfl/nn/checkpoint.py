"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"TRFL"  u32 version  u32 header_len  header (UTF-8 JSON)
    repeated header["n_tensors"] times:
        u32 name_len  name (UTF-8)  u32 rank  u64 dims[rank]  f32 payload
"""
import json
import struct

import numpy as np

from ..exceptions import LoadError

MAGIC = b"TRFL"
VERSION = 1


def save_checkpoint(path, tensors, header=None):
    """Write ``tensors`` (name -> array) and a JSON-serialisable ``header``."""
    header = dict(header or {})
    header["n_tensors"] = len(tensors)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype="<f4")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path):
    """Return ``(header, tensors)``; raises :class:`LoadError` on any corruption."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise LoadError(f"cannot read checkpoint {path}: {exc}") from exc
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise LoadError(f"checkpoint truncated while reading {what} at byte {pos}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise LoadError("not a checkpoint (bad magic)")
    version, hlen = struct.unpack("<II", take(8, "version"))
    if version != VERSION:
        raise LoadError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(take(hlen, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LoadError(f"corrupt checkpoint header: {exc}") from exc
    tensors = {}
    for _ in range(int(header.get("n_tensors", 0))):
        (nlen,) = struct.unpack("<I", take(4, "name length"))
        name = take(nlen, "name").decode("utf-8", errors="replace")
        (rank,) = struct.unpack("<I", take(4, "rank"))
        dims = struct.unpack(f"<{rank}Q", take(8 * rank, "dims"))
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        arr = np.frombuffer(take(4 * count, f"tensor {name}"), dtype="<f4").reshape(dims)
        tensors[name] = arr.astype(np.float32)
    if pos != len(data):
        raise LoadError(f"{len(data) - pos} trailing bytes after tensor table")
    return header, tensors
