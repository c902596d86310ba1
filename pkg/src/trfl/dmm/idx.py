"""Reader and writer for the IDX binary format used by the MNIST distribution."""
import gzip
import struct

import numpy as np

from ..exceptions import LoadError, ParseError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
_MAX_ELEMENTS = 1 << 32


def parse_idx(data):
    """Decode an unsigned-byte IDX payload.

    Args:
        data: the raw file contents.

    Returns:
        ``uint8`` array of shape ``(n, rows, cols)`` for image files or
        ``(n,)`` for label files.

    Raises:
        ParseError: bad magic, truncated header or payload, trailing bytes,
            or a dimension product that overflows. ``offset`` is the byte
            position where decoding failed.
    """
    data = memoryview(bytes(data))
    if len(data) < 4:
        raise ParseError("truncated header: missing magic", 0)
    magic = struct.unpack_from(">I", data, 0)[0]
    if magic not in (IMAGES_MAGIC, LABELS_MAGIC):
        raise ParseError(f"bad magic 0x{magic:08x}", 0)
    rank = 3 if magic == IMAGES_MAGIC else 1
    header = 4 + 4 * rank
    if len(data) < header:
        raise ParseError(f"truncated header: need {header} bytes, have {len(data)}", len(data))
    dims = struct.unpack_from(f">{rank}I", data, 4)
    total = 1
    for i, n in enumerate(dims):
        total *= n
        if total >= _MAX_ELEMENTS:
            raise ParseError(f"dimension overflow: {dims}", 4 + 4 * i)
    end = header + total
    if len(data) < end:
        raise ParseError(f"truncated payload: need {total} bytes after header, have "
                         f"{len(data) - header}", len(data))
    if len(data) > end:
        raise ParseError(f"{len(data) - end} trailing bytes after payload", end)
    return np.frombuffer(data, dtype=np.uint8, count=total, offset=header).reshape(dims).copy()


def encode_idx(array):
    """Inverse of :func:`parse_idx` for ``uint8`` arrays of rank 1 or 3."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    if array.ndim == 3:
        magic = IMAGES_MAGIC
    elif array.ndim == 1:
        magic = LABELS_MAGIC
    else:
        raise ValueError(f"IDX arrays must have rank 1 or 3, got {array.ndim}")
    return struct.pack(f">I{array.ndim}I", magic, *array.shape) + array.tobytes()


def load_idx(path):
    """Read an IDX file from disk, transparently decompressing ``.gz``."""
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    try:
        with opener(path, "rb") as fh:
            return parse_idx(fh.read())
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
