"""Order sensitivity of an architecture: the share of last-layer windows that
see a single sub-action.

A high ratio means most windows encode one sub-action at a time, so the
global average over windows carries little information about sub-action
order.
"""
import csv
import io
import json
from dataclasses import dataclass, field

from .arch import build_preset, normalize_preset_name, rf_trace
from .arch.graph import ArchGraph
from .exceptions import ConfigurationError


@dataclass(frozen=True)
class SegmentLayout:
    """Contiguous half-open frame segments ``[start, end)`` covering ``[0, length)``."""

    length: int
    segments: tuple

    def __post_init__(self):
        segs = tuple((int(a), int(b)) for a, b in self.segments)
        if not segs:
            raise ConfigurationError("layout needs at least one segment")
        pos = 0
        for a, b in segs:
            if a != pos or b <= a:
                raise ConfigurationError(f"segments must be contiguous and non-empty, got {segs}")
            pos = b
        if pos != self.length:
            raise ConfigurationError(f"segments end at {pos}, layout length is {self.length}")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def equal(cls, n_segments, duration):
        """``n_segments`` back-to-back segments of ``duration`` frames each."""
        return cls(n_segments * duration,
                   tuple((i * duration, (i + 1) * duration) for i in range(n_segments)))

    def segment_of(self, frame):
        for idx, (a, b) in enumerate(self.segments):
            if a <= frame < b:
                return idx
        raise ValueError(f"frame {frame} outside layout of length {self.length}")


@dataclass(frozen=True)
class SensitivityReport:
    single: int
    total: int
    windows: list = field(default_factory=list)  # (index, (first, last) or None, "single"|"mixed")

    @property
    def ratio(self):
        return self.single / self.total

    def to_dict(self):
        return {"single_windows": self.single, "total_windows": self.total, "ratio": self.ratio,
                "windows": [{"index": i, "frames": list(iv) if iv else None, "kind": kind}
                            for i, iv, kind in self.windows]}


def window_ratio(arch, layout):
    """Classify every last-layer window of ``arch`` against ``layout``.

    A window is single when its clipped frame interval lies inside one
    segment; touching a boundary (covering frames ``d-1`` and ``d``) is mixed.

    Raises:
        ConfigurationError: the architecture yields no windows for this length.
    """
    trace = rf_trace(arch, layout.length)
    if not trace:
        raise ConfigurationError(f"architecture produces no windows for {layout.length} frames")
    windows = []
    single = 0
    for i, iv in trace:
        kind = "mixed"
        if iv is not None and layout.segment_of(iv[0]) == layout.segment_of(iv[1]):
            kind = "single"
            single += 1
        windows.append((i, iv, kind))
    return SensitivityReport(single, len(trace), windows)


def _resolve(arch):
    if isinstance(arch, ArchGraph):
        return arch.meta.get("preset", "custom"), arch
    return normalize_preset_name(arch), build_preset(arch)


def sweep(archs, durations, n_segments=2):
    """Evaluate :func:`window_ratio` for every ``(arch, duration)`` pair.

    ``archs`` holds preset names or graphs. Returns one dict per pair with
    keys ``model, d, L, single, total, ratio, error``. A pair whose clip is
    too short for the architecture keeps its row with ``total = 0``,
    ``ratio = None`` and the reason in ``error``.
    """
    rows = []
    for arch in archs:
        name, graph = _resolve(arch)
        for d in durations:
            row = {"model": name, "d": d, "L": n_segments * d}
            try:
                rep = window_ratio(graph, SegmentLayout.equal(n_segments, d))
            except ConfigurationError as exc:
                row.update(single=0, total=0, ratio=None, error=str(exc))
            else:
                row.update(single=rep.single, total=rep.total, ratio=rep.ratio, error="")
            rows.append(row)
    return rows


def rows_to_csv(rows):
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def rows_to_json(rows):
    return json.dumps(rows, indent=2)
