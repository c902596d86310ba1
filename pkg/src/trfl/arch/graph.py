"""Declarative DAG of layer descriptors."""
from dataclasses import dataclass, field, asdict
from graphlib import CycleError, TopologicalSorter

from ..exceptions import ArchitectureError

KINDS = ("input", "conv", "maxpool", "batchnorm", "relu", "global_pool", "fc", "residual_add")
WINDOWED = ("conv", "maxpool")
HEAD = ("global_pool", "fc")


def _triple(value, what, node):
    if isinstance(value, int):
        value = (value,) * 3
    value = tuple(int(v) for v in value)
    if len(value) != 3:
        raise ArchitectureError(f"{what} must have three entries (t, h, w), got {value}", node)
    return value


@dataclass(frozen=True)
class LayerNode:
    """One layer.

    ``kernel``/``stride``/``padding`` are (t, h, w) triples and only matter for
    ``conv`` and ``maxpool``. ``out_channels`` is the channel count of a conv,
    the input channel count of the ``input`` node, and the class count of
    ``fc``. ``in_channels`` on a conv is optional and checked against the
    inferred value. ``crop`` lets a ``residual_add`` truncate the longer
    branch at its trailing end.
    """

    name: str
    kind: str
    inputs: tuple = ()
    kernel: tuple = (1, 1, 1)
    stride: tuple = (1, 1, 1)
    padding: tuple = (0, 0, 0)
    in_channels: int = None
    out_channels: int = None
    bias: bool = False
    crop: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArchitectureError(f"unknown layer kind {self.kind!r}", self.name)
        object.__setattr__(self, "inputs", tuple(self.inputs))
        for what in ("kernel", "stride", "padding"):
            object.__setattr__(self, what, _triple(getattr(self, what), what, self.name))
        if min(self.kernel) < 1 or min(self.stride) < 1:
            raise ArchitectureError("kernel and stride must be >= 1 in every dimension", self.name)
        if min(self.padding) < 0:
            raise ArchitectureError("padding must be >= 0", self.name)
        if self.kind not in WINDOWED and (
                self.kernel != (1, 1, 1) or self.stride != (1, 1, 1) or self.padding != (0, 0, 0)):
            raise ArchitectureError(f"{self.kind} is geometry-neutral; kernel/stride/padding not allowed",
                                    self.name)
        n_in = len(self.inputs)
        if self.kind == "input":
            if n_in:
                raise ArchitectureError("input node cannot have predecessors", self.name)
            if not self.out_channels or self.out_channels < 1:
                raise ArchitectureError("input node needs out_channels >= 1", self.name)
        elif self.kind == "residual_add":
            if n_in != 2:
                raise ArchitectureError(f"residual_add needs exactly two inputs, got {n_in}", self.name)
        elif n_in != 1:
            raise ArchitectureError(f"{self.kind} needs exactly one input, got {n_in}", self.name)
        if self.kind in ("conv", "fc") and (not self.out_channels or self.out_channels < 1):
            raise ArchitectureError(f"{self.kind} needs out_channels >= 1", self.name)
        if self.kind == "maxpool" and any(2 * p > k for p, k in zip(self.padding, self.kernel)):
            raise ArchitectureError("maxpool padding may not exceed half the kernel", self.name)

    def to_dict(self):
        d = asdict(self)
        for k in ("kernel", "stride", "padding", "inputs"):
            d[k] = list(d[k])
        return {k: v for k, v in d.items()
                if v is not None and not (k in ("bias", "crop") and v is False)}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class ArchGraph:
    """Validated, topologically ordered DAG with one source and one sink.

    ``meta`` carries descriptive fields (preset name, width, ...) that the
    calculus ignores.
    """

    nodes: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        by_name = {}
        for n in nodes:
            if n.name in by_name:
                raise ArchitectureError("duplicate node name", n.name)
            by_name[n.name] = n
        for n in nodes:
            for p in n.inputs:
                if p not in by_name:
                    raise ArchitectureError(f"unknown input {p!r}", n.name)
        try:
            order = list(TopologicalSorter({n.name: n.inputs for n in nodes}).static_order())
        except CycleError as exc:
            raise ArchitectureError(f"graph has a cycle through {exc.args[1]}") from None
        index = {n.name: i for i, n in enumerate(nodes)}
        if all(index[p] < index[n.name] for n in nodes for p in n.inputs):
            ordered = nodes
        else:
            ordered = tuple(by_name[name] for name in order)
        sources = [n for n in ordered if n.kind == "input"]
        if len(sources) != 1:
            raise ArchitectureError(f"expected exactly one input node, found {len(sources)}")
        consumers = {n.name: [] for n in ordered}
        for n in ordered:
            for p in n.inputs:
                consumers[p].append(n.name)
        sinks = [name for name, c in consumers.items() if not c]
        if len(sinks) != 1:
            raise ArchitectureError(f"expected exactly one sink, found {sinks}")
        reachable = {sources[0].name}
        for n in ordered:
            if any(p in reachable for p in n.inputs):
                reachable.add(n.name)
        missing = [n.name for n in ordered if n.name not in reachable]
        if missing:
            raise ArchitectureError("not reachable from the input", missing[0])
        object.__setattr__(self, "nodes", ordered)
        object.__setattr__(self, "_by_name", by_name)
        object.__setattr__(self, "_consumers", {k: tuple(v) for k, v in consumers.items()})

    def __getitem__(self, name):
        return self._by_name[name]

    def __iter__(self):
        return iter(self.nodes)

    def __len__(self):
        return len(self.nodes)

    @property
    def source(self):
        return next(n for n in self.nodes if n.kind == "input")

    @property
    def sink(self):
        return next(n for n in self.nodes if not self._consumers[n.name])

    def consumers(self, name):
        return self._consumers[name]

    @property
    def edges(self):
        return [(p, n.name) for n in self.nodes for p in n.inputs]

    @property
    def feature_node(self):
        """Last node before the pooling/classification head.

        This is the "last convolutional layer" whose windows define the
        temporal receptive field.
        """
        for n in self.nodes:
            if n.kind in HEAD:
                return self[n.inputs[0]]
        return self.sink

    def to_dict(self):
        return {"meta": dict(self.meta), "nodes": [n.to_dict() for n in self.nodes]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(LayerNode.from_dict(n) for n in d["nodes"]), meta=dict(d.get("meta", {})))


class GraphBuilder:
    """Append-style helper; each call chains from the previous node unless
    ``inputs`` is given."""

    def __init__(self, in_channels):
        self.nodes = [LayerNode("input", "input", out_channels=in_channels)]
        self.last = "input"

    def add(self, name, kind, inputs=None, **kw):
        if inputs is None:
            inputs = (self.last,)
        self.nodes.append(LayerNode(name, kind, tuple(inputs), **kw))
        self.last = name
        return name

    def build(self, **meta):
        return ArchGraph(tuple(self.nodes), meta=meta)
