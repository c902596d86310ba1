"""Executable network built from an :class:`~trfl.arch.ArchGraph`.

Forward runs nodes in topological order and keeps every activation; backward
walks the graph in reverse and sums gradients flowing into each node, so
residual branches need no special handling beyond ``ResidualAdd``.
"""
import numpy as np

from ..arch.calculus import infer_channels
from ..exceptions import ConfigurationError
from .layers import (DEFAULT_DTYPE, BatchNorm3d, Conv3d, GlobalAvgPool, Layer, Linear, MaxPool3d,
                     ReLU, ResidualAdd)


class _Identity(Layer):
    def forward(self, x, train=False):
        return x

    def backward(self, grad_out):
        return grad_out


def _make_layer(node, channels, rng, dtype, fc_init):
    kind = node.kind
    if kind == "conv":
        return Conv3d(channels[node.inputs[0]], node.out_channels, node.kernel, node.stride,
                      node.padding, bias=node.bias, rng=rng, dtype=dtype)
    if kind == "batchnorm":
        return BatchNorm3d(channels[node.name], dtype=dtype)
    if kind == "relu":
        return ReLU()
    if kind == "maxpool":
        return MaxPool3d(node.kernel, node.stride, node.padding)
    if kind == "global_pool":
        return GlobalAvgPool()
    if kind == "fc":
        return Linear(channels[node.inputs[0]], node.out_channels, rng=rng, dtype=dtype,
                      init=fc_init)
    if kind == "residual_add":
        return ResidualAdd(crop=node.crop)
    return _Identity()


class Network:
    """Layers keyed by node name plus graph-ordered forward/backward.

    ``fc_init`` selects the classifier weight variance (see :class:`Linear`).
    """

    def __init__(self, arch, seed=0, dtype=DEFAULT_DTYPE, fc_init="fan_out"):
        self.arch = arch
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        channels = infer_channels(arch)
        self.layers = {n.name: _make_layer(n, channels, rng, self.dtype, fc_init) for n in arch}
        for n in arch:
            if n.kind == "conv" and n.inputs[0] == arch.source.name:
                self.layers[n.name].need_input_grad = False
        self._grad_needed = {}

    @property
    def in_channels(self):
        return self.arch.source.out_channels

    def astype(self, dtype):
        self.dtype = np.dtype(dtype)
        for layer in self.layers.values():
            layer.astype(self.dtype)
        return self

    def forward(self, x, train=False, until=None):
        """Run the graph on ``x`` of shape (N, C, T, H, W).

        Returns the sink output (class scores), or the activation of node
        ``until`` when given.
        """
        x = np.asarray(x)
        if x.ndim != 5:
            raise ConfigurationError(f"network input must be rank 5 (N, C, T, H, W), got {x.shape}")
        if x.shape[1] != self.in_channels:
            raise ConfigurationError(
                f"input has {x.shape[1]} channels, network expects {self.in_channels}")
        x = x.astype(self.dtype, copy=False)
        acts = {}
        for node in self.arch:
            layer = self.layers[node.name]
            if node.kind == "input":
                acts[node.name] = x
            elif node.kind == "residual_add":
                a, b = (acts[p] for p in node.inputs)
                acts[node.name] = layer.forward(a, b, train)
            else:
                acts[node.name] = layer.forward(acts[node.inputs[0]], train)
            if node.name == until:
                return acts[node.name]
        return acts[self.arch.sink.name]

    def backward(self, grad_out):
        """Backpropagate ``grad_out`` (gradient of the sink output).

        Parameter gradients accumulate in each layer's ``grads``; the input
        gradient is returned when the first layer computes it, else None.
        """
        grads = {self.arch.sink.name: grad_out}
        for node in reversed(self.arch.nodes):
            g = grads.pop(node.name, None)
            if g is None or node.kind == "input":
                if node.kind == "input":
                    return g
                continue
            layer = self.layers[node.name]
            out = layer.backward(g)
            if node.kind == "residual_add":
                pairs = zip(node.inputs, out)
            else:
                pairs = [(node.inputs[0], out)]
            for name, gi in pairs:
                if gi is None:
                    continue
                if name in grads:
                    grads[name] = grads[name] + gi
                else:
                    grads[name] = gi
        return None

    def parameters(self):
        """``(qualified_name, param, grad)`` triples in graph order."""
        return [(f"{name}.{k}", layer.params[k], layer.grads[k])
                for name, layer in self.layers.items() for k in layer.params]

    def zero_grad(self):
        for layer in self.layers.values():
            layer.zero_grad()

    def n_parameters(self):
        return sum(p.size for _, p, _ in self.parameters())

    def state_dict(self):
        state = {}
        for name, layer in self.layers.items():
            for k, v in layer.params.items():
                state[f"{name}.{k}"] = v
            for k, v in layer.buffers.items():
                state[f"{name}.{k}"] = v
        return state

    def load_state_dict(self, state):
        own = self.state_dict()
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise ConfigurationError(f"state mismatch: missing {missing[:3]} unexpected {extra[:3]}")
        for name, layer in self.layers.items():
            for d in (layer.params, layer.buffers):
                for k in d:
                    v = np.asarray(state[f"{name}.{k}"])
                    if v.shape != d[k].shape:
                        raise ConfigurationError(
                            f"{name}.{k}: shape {v.shape} does not match {d[k].shape}")
                    d[k] = v.astype(self.dtype).copy()
        for layer in self.layers.values():
            layer.grads = {k: np.zeros_like(v) for k, v in layer.params.items()}
