"""On-disk container for a dataset split.

A container is a directory holding ``manifest.json`` (config echo plus
per-video metadata) and ``videos.bin``, a concatenation of records::

    b"DMMV" | u32 version | u32 T | u32 H | u32 W | T*H*W uint8 frames

All integers are little-endian.
"""
import json
import os
import struct

import numpy as np

from ..exceptions import LoadError
from .generate import Split, VideoSample

MAGIC = b"DMMV"
VERSION = 1
FORMAT = "dmm-container"
_RECORD = struct.Struct("<4s4I")


def _manifest_bytes(manifest):
    return (json.dumps(manifest, sort_keys=True, indent=1) + "\n").encode("utf-8")


def write_container(split, path):
    """Write ``split`` to the directory ``path`` (created if missing)."""
    os.makedirs(path, exist_ok=True)
    videos = []
    offset = 0
    with open(os.path.join(path, "videos.bin"), "wb") as blob:
        for sample in split.samples:
            frames = np.ascontiguousarray(sample.frames, dtype=np.uint8)
            if frames.ndim != 3:
                raise ValueError(f"video {sample.index} frames must be (T, H, W), got {frames.shape}")
            record = _RECORD.pack(MAGIC, VERSION, *frames.shape) + frames.tobytes()
            blob.write(record)
            meta = sample.metadata()
            meta.update(offset=offset, nbytes=len(record))
            videos.append(meta)
            offset += len(record)
    manifest = {"format": FORMAT, "version": VERSION, "split": split.name, "config": split.config,
                "n_videos": len(videos), "videos": videos}
    with open(os.path.join(path, "manifest.json"), "wb") as fh:
        fh.write(_manifest_bytes(manifest))


def read_container(path):
    """Load a split written by :func:`write_container`.

    Raises:
        LoadError: missing files, unknown format or version, or a manifest
            that disagrees with the video records.
    """
    try:
        with open(os.path.join(path, "manifest.json"), "rb") as fh:
            manifest = json.loads(fh.read().decode("utf-8"))
        with open(os.path.join(path, "videos.bin"), "rb") as fh:
            blob = fh.read()
    except (OSError, ValueError) as exc:
        raise LoadError(f"cannot read container {path}: {exc}") from exc
    if manifest.get("format") != FORMAT:
        raise LoadError(f"{path}: not a dataset container (format {manifest.get('format')!r})")
    if manifest.get("version") != VERSION:
        raise LoadError(f"{path}: container version {manifest.get('version')} unsupported "
                        f"(expected {VERSION})")
    entries = manifest.get("videos", [])
    if manifest.get("n_videos") != len(entries):
        raise LoadError(f"{path}: manifest lists {len(entries)} videos but declares "
                        f"n_videos={manifest.get('n_videos')}")

    samples = []
    pos = 0
    while pos < len(blob):
        if pos + _RECORD.size > len(blob):
            raise LoadError(f"{path}: truncated video header at byte {pos}")
        magic, version, t, h, w = _RECORD.unpack_from(blob, pos)
        if magic != MAGIC:
            raise LoadError(f"{path}: bad video magic {magic!r} at byte {pos}")
        if version != VERSION:
            raise LoadError(f"{path}: video version {version} at byte {pos} unsupported")
        end = pos + _RECORD.size + t * h * w
        if end > len(blob):
            raise LoadError(f"{path}: truncated video payload at byte {pos}")
        k = len(samples)
        if k >= len(entries):
            raise LoadError(f"{path}: videos.bin holds more videos than the manifest's {len(entries)}")
        meta = entries[k]
        if meta.get("offset") != pos or meta.get("nbytes") != end - pos:
            raise LoadError(f"{path}: manifest entry {k} does not match its record at byte {pos}")
        frames = np.frombuffer(blob, np.uint8, t * h * w, pos + _RECORD.size).reshape(t, h, w).copy()
        samples.append(VideoSample(frames, int(meta["label"]),
                                   tuple(tuple(s) for s in meta["segments"]),
                                   bool(meta["permuted"]), meta["provenance"], int(meta["index"])))
        pos = end
    if len(samples) != len(entries):
        raise LoadError(f"{path}: manifest lists {len(entries)} videos, videos.bin holds {len(samples)}")
    return Split(manifest["split"], manifest["config"], samples)
