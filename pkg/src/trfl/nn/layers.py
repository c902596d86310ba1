"""Stateful layers: parameters, gradient buffers and the forward cache."""
import numpy as np

from . import functional as F

DEFAULT_DTYPE = np.float32


class Layer:
    """Base layer.

    ``params`` and ``grads`` are parallel dicts of arrays (gradients accumulate
    until :meth:`zero_grad`); ``buffers`` hold non-learned state that is still
    checkpointed, such as batch-norm running statistics.
    """

    def __init__(self):
        self.params = {}
        self.grads = {}
        self.buffers = {}
        self._cache = None

    def _add_param(self, name, value):
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0)

    def astype(self, dtype):
        for d in (self.params, self.grads, self.buffers):
            for k in d:
                d[k] = d[k].astype(dtype)
        return self

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, grad_out):
        raise NotImplementedError


class Conv3d(Layer):
    def __init__(self, in_channels, out_channels, kernel=1, stride=1, padding=0, bias=False,
                 rng=None, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.kernel = F.triple(kernel, "kernel")
        self.stride = F.triple(stride, "stride")
        self.padding = F.triple(padding, "padding")
        self.need_input_grad = True
        rng = np.random.default_rng() if rng is None else rng
        fan_out = out_channels * int(np.prod(self.kernel))
        w = rng.normal(0.0, np.sqrt(2.0 / fan_out), (out_channels, in_channels) + self.kernel)
        self._add_param("weight", w.astype(dtype))
        if bias:
            self._add_param("bias", np.zeros(out_channels, dtype=dtype))

    def forward(self, x, train=False):
        self._cache = x
        return F.conv3d_forward(x, self.params["weight"], self.params.get("bias"),
                                self.stride, self.padding)

    def backward(self, grad_out):
        gx, gw, gb = F.conv3d_backward(grad_out, self._cache, self.params["weight"], self.stride,
                                       self.padding, has_bias="bias" in self.params,
                                       need_input_grad=self.need_input_grad)
        self.grads["weight"] += gw
        if gb is not None:
            self.grads["bias"] += gb
        return gx


class BatchNorm3d(Layer):
    def __init__(self, channels, momentum=0.1, eps=1e-5, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self._add_param("weight", np.ones(channels, dtype=dtype))
        self._add_param("bias", np.zeros(channels, dtype=dtype))
        self.buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=dtype)

    def forward(self, x, train=False):
        out, cache = F.batchnorm_forward(
            x, self.params["weight"], self.params["bias"], self.buffers["running_mean"],
            self.buffers["running_var"], train, self.momentum, self.eps)
        self._cache = (cache, train)
        return out

    def backward(self, grad_out):
        cache, train = self._cache
        gx, gg, gb = F.batchnorm_backward(grad_out, cache, self.params["weight"], train)
        self.grads["weight"] += gg
        self.grads["bias"] += gb
        return gx


class ReLU(Layer):
    def forward(self, x, train=False):
        self._cache = x
        return F.relu_forward(x)

    def backward(self, grad_out):
        return F.relu_backward(grad_out, self._cache)


class MaxPool3d(Layer):
    def __init__(self, kernel, stride=None, padding=0):
        super().__init__()
        self.kernel = F.triple(kernel, "kernel")
        self.stride = self.kernel if stride is None else F.triple(stride, "stride")
        self.padding = F.triple(padding, "padding")

    def forward(self, x, train=False):
        out, argmax = F.maxpool3d_forward(x, self.kernel, self.stride, self.padding)
        self._cache = (argmax, x.shape)
        return out

    def backward(self, grad_out):
        argmax, shape = self._cache
        return F.maxpool3d_backward(grad_out, argmax, shape, self.kernel, self.stride, self.padding)


class GlobalAvgPool(Layer):
    def forward(self, x, train=False):
        self._cache = x.shape
        return F.global_avg_pool_forward(x)

    def backward(self, grad_out):
        return F.global_avg_pool_backward(grad_out, self._cache)


class Linear(Layer):
    """Fully connected layer.

    ``init="fan_out"`` draws weights with variance ``2 / out_features``;
    ``init="fan_in"`` uses ``1 / in_features``, which keeps initial class
    scores near unit scale when there are few outputs and many features.
    ``init="small"`` draws from a normal with standard deviation 0.01, so
    every class starts with a near-uniform score.
    """

    def __init__(self, in_features, out_features, rng=None, dtype=DEFAULT_DTYPE, init="fan_out"):
        super().__init__()
        rng = np.random.default_rng() if rng is None else rng
        if init == "fan_out":
            var = 2.0 / out_features
        elif init == "fan_in":
            var = 1.0 / in_features
        elif init == "small":
            var = 1e-4
        else:
            raise ValueError(f"init must be 'fan_out', 'fan_in' or 'small', got {init!r}")
        w = rng.normal(0.0, np.sqrt(var), (out_features, in_features))
        self._add_param("weight", w.astype(dtype))
        self._add_param("bias", np.zeros(out_features, dtype=dtype))

    def forward(self, x, train=False):
        self._cache = x
        return F.linear_forward(x, self.params["weight"], self.params["bias"])

    def backward(self, grad_out):
        gx, gw, gb = F.linear_backward(grad_out, self._cache, self.params["weight"])
        self.grads["weight"] += gw
        self.grads["bias"] += gb
        return gx


class ResidualAdd(Layer):
    """Two-input sum; see :func:`trfl.nn.functional.residual_add_forward`."""

    def __init__(self, crop=False):
        super().__init__()
        self.crop = crop

    def forward(self, a, b, train=False):
        self._cache = (a.shape, b.shape)
        return F.residual_add_forward(a, b, self.crop)

    def backward(self, grad_out):
        return F.residual_add_backward(grad_out, *self._cache)
