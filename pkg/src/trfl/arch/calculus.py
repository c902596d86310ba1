"""Static analysis of an :class:`ArchGraph`: temporal receptive field, jump,
window offset, shape inference and parameter counting.

Along a windowed layer with kernel ``k``, stride ``s`` and padding ``p``::

    r' = r + (k - 1) * J      J' = J * s      o' = o + p * J
    L' = floor((L + 2p - k) / s) + 1

so output position ``i`` of a node sees input frames
``[i*J - o, i*J - o + r - 1]``. The pooling/classification head is not part
of the receptive field; reports stop at :attr:`ArchGraph.feature_node`.
"""
from dataclasses import dataclass

from ..exceptions import ArchitectureError
from .graph import HEAD, WINDOWED


@dataclass(frozen=True)
class NodeRF:
    rf: int
    jump: int
    offset: int
    length: int


@dataclass(frozen=True)
class RFReport:
    """Per-node temporal geometry plus the summary at the feature node."""

    input_len: int
    nodes: dict
    feature_node: str
    shapes: dict = None

    @property
    def last(self):
        return self.nodes[self.feature_node]

    @property
    def rf(self):
        return self.last.rf

    @property
    def jump(self):
        return self.last.jump

    @property
    def offset(self):
        return self.last.offset

    @property
    def length(self):
        return self.last.length

    def windows(self):
        """Unclipped frame interval of every feature-node window."""
        r, j, o = self.rf, self.jump, self.offset
        return [(i * j - o, i * j - o + r - 1) for i in range(self.length)]

    def to_dict(self):
        rows = []
        for name, n in self.nodes.items():
            row = {"node": name, "rf": n.rf, "jump": n.jump, "offset": n.offset, "length": n.length}
            if self.shapes and name in self.shapes:
                row["shape"] = list(self.shapes[name])
            rows.append(row)
        return {
            "input_frames": self.input_len,
            "last_conv": {"node": self.feature_node, "rf": self.rf, "jump": self.jump,
                          "offset": self.offset, "length": self.length},
            "nodes": rows,
        }


def _merge(node, a, b):
    if a.jump != b.jump:
        raise ArchitectureError(f"branch jumps differ at merge ({a.jump} vs {b.jump})", node.name)
    if a.length != b.length and not node.crop:
        raise ArchitectureError(f"branch lengths differ at merge ({a.length} vs {b.length})", node.name)
    offset = max(a.offset, b.offset)
    # union of the two aligned windows; equals max(r) when one nests in the other
    rf = max(a.rf - a.offset, b.rf - b.offset) + offset
    return NodeRF(rf, a.jump, offset, min(a.length, b.length))


def rf_calculus(arch, input_len, with_shapes=False, input_hw=None):
    """Temporal receptive field of every non-head node for ``input_len`` frames.

    Raises:
        ArchitectureError: a non-positive output length, or branches with
            different jumps/lengths meeting at a ``residual_add``.
    """
    if input_len < 1:
        raise ArchitectureError(f"input length must be >= 1, got {input_len}")
    geo = {}
    for node in arch:
        if node.kind in HEAD:
            continue
        if node.kind == "input":
            geo[node.name] = NodeRF(1, 1, 0, int(input_len))
            continue
        if node.kind == "residual_add":
            geo[node.name] = _merge(node, geo[node.inputs[0]], geo[node.inputs[1]])
            continue
        prev = geo[node.inputs[0]]
        if node.kind in WINDOWED:
            k, s, p = node.kernel[0], node.stride[0], node.padding[0]
            length = (prev.length + 2 * p - k) // s + 1
            if length < 1:
                raise ArchitectureError(
                    f"temporal output length {length} < 1 (input {prev.length}, kernel {k}, "
                    f"stride {s}, padding {p})", node.name)
            geo[node.name] = NodeRF(prev.rf + (k - 1) * prev.jump, prev.jump * s,
                                    prev.offset + p * prev.jump, length)
        else:
            geo[node.name] = prev
    shapes = None
    if with_shapes:
        hw = input_hw if input_hw is not None else (input_len, input_len)
        shapes = shape_inference(arch, (arch.source.out_channels, input_len) + tuple(hw))
    return RFReport(int(input_len), geo, arch.feature_node.name, shapes)


def infer_channels(arch):
    """Output channel count of every node (class count for ``fc``)."""
    ch = {}
    for node in arch:
        if node.kind == "input":
            ch[node.name] = node.out_channels
        elif node.kind == "conv":
            c_in = ch[node.inputs[0]]
            if node.in_channels is not None and node.in_channels != c_in:
                raise ArchitectureError(
                    f"declares {node.in_channels} input channels but receives {c_in}", node.name)
            ch[node.name] = node.out_channels
        elif node.kind == "fc":
            ch[node.name] = node.out_channels
        elif node.kind == "residual_add":
            a, b = (ch[p] for p in node.inputs)
            if a != b:
                raise ArchitectureError(f"branch channels differ at merge ({a} vs {b})", node.name)
            ch[node.name] = a
        else:
            ch[node.name] = ch[node.inputs[0]]
    return ch


def shape_inference(arch, input_shape):
    """Full ``(C, T, H, W)`` at every node for a single input of ``input_shape``.

    ``input_shape`` may be ``(T, H, W)`` (channels taken from the input node)
    or ``(C, T, H, W)``. Head nodes report ``(C, 1, 1, 1)``.
    """
    input_shape = tuple(int(v) for v in input_shape)
    if len(input_shape) == 3:
        input_shape = (arch.source.out_channels,) + input_shape
    if len(input_shape) != 4:
        raise ArchitectureError(f"input shape must be (T, H, W) or (C, T, H, W), got {input_shape}")
    if input_shape[0] != arch.source.out_channels:
        raise ArchitectureError(
            f"input has {input_shape[0]} channels, architecture expects {arch.source.out_channels}",
            arch.source.name)
    channels = infer_channels(arch)
    shapes = {}
    for node in arch:
        c = channels[node.name]
        if node.kind == "input":
            shapes[node.name] = input_shape
            continue
        if node.kind in HEAD:
            shapes[node.name] = (c, 1, 1, 1)
            continue
        if node.kind == "residual_add":
            a, b = (shapes[p][1:] for p in node.inputs)
            if a != b and not node.crop:
                raise ArchitectureError(f"branch shapes differ at merge ({a} vs {b})", node.name)
            shapes[node.name] = (c,) + tuple(min(x, y) for x, y in zip(a, b))
            continue
        dims = shapes[node.inputs[0]][1:]
        if node.kind in WINDOWED:
            dims = tuple((n + 2 * p - k) // s + 1
                         for n, k, s, p in zip(dims, node.kernel, node.stride, node.padding))
            if min(dims) < 1:
                raise ArchitectureError(f"non-positive output size {dims}", node.name)
        shapes[node.name] = (c,) + dims
    return shapes


def param_count(arch):
    """Number of learned parameters (batch-norm running statistics excluded)."""
    channels = infer_channels(arch)
    total = 0
    for node in arch:
        if node.kind == "conv":
            kt, kh, kw = node.kernel
            total += kt * kh * kw * channels[node.inputs[0]] * node.out_channels
            if node.bias:
                total += node.out_channels
        elif node.kind == "fc":
            total += channels[node.inputs[0]] * node.out_channels + node.out_channels
        elif node.kind == "batchnorm":
            total += 2 * channels[node.name]
    return total


def _union(intervals):
    intervals = [iv for iv in intervals if iv is not None]
    if not intervals:
        return None
    return min(a for a, _ in intervals), max(b for _, b in intervals)


def frame_coverage(arch, input_len):
    """Exact input-frame extent of every temporal position of every non-head node.

    Windows are clipped to the valid positions of each layer's input, so
    frames that a floor-rounded stride never reaches are excluded. Positions
    that only see padding map to ``None``.
    """
    report = rf_calculus(arch, input_len)
    cov = {}
    for node in arch:
        if node.name not in report.nodes:
            continue
        if node.kind == "input":
            cov[node.name] = [(t, t) for t in range(input_len)]
        elif node.kind == "residual_add":
            a, b = (cov[p] for p in node.inputs)
            cov[node.name] = [_union(pair) for pair in zip(a, b)]
        elif node.kind in WINDOWED:
            prev = cov[node.inputs[0]]
            k, s, p = node.kernel[0], node.stride[0], node.padding[0]
            out = []
            for i in range(report.nodes[node.name].length):
                lo, hi = max(i * s - p, 0), min(i * s - p + k - 1, len(prev) - 1)
                out.append(_union(prev[lo:hi + 1]))
            cov[node.name] = out
        else:
            cov[node.name] = cov[node.inputs[0]]
    return cov


def rf_trace(arch, input_len):
    """Frame interval covered by each feature-node window.

    Returns a list of ``(window_index, (first_frame, last_frame))``. For
    windows that stay inside the clip this is ``[i*J - o, i*J - o + r - 1]``
    clipped to ``[0, input_len - 1]``; clipping is applied at every layer so
    padding and frames dropped by strided layers never count. A window lying
    entirely in padding maps to ``None``.
    """
    cov = frame_coverage(arch, input_len)
    return list(enumerate(cov[arch.feature_node.name]))
