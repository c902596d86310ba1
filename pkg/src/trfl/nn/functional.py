"""Stateless forward/backward kernels on rank-5 ``(N, C, T, H, W)`` arrays.

Every backward function takes the upstream gradient plus whatever the forward
pass cached and returns plain arrays; accumulation into parameter buffers is
the job of :mod:`trfl.nn.layers`.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ConfigurationError

_SPATIAL_AXES = (2, 3, 4)


def triple(value, name="value"):
    """Expand an int or length-3 sequence into a tuple of three ints."""
    if isinstance(value, (int, np.integer)):
        return (int(value),) * 3
    value = tuple(int(v) for v in value)
    if len(value) != 3:
        raise ConfigurationError(f"{name} must have 3 entries (t, h, w), got {value}")
    return value


def output_length(length, kernel, stride, padding):
    """Sliding-window output size ``floor((L + 2p - k) / s) + 1``."""
    return (length + 2 * padding - kernel) // stride + 1


def check_tensor5(x, name="input"):
    if x.ndim != 5:
        raise ConfigurationError(f"{name} must be rank 5 (N, C, T, H, W), got shape {x.shape}")


def _check_window(shape, kernel, stride, padding, what):
    for axis, (dim, k, s, p) in enumerate(zip(shape, kernel, stride, padding)):
        if k < 1 or s < 1 or p < 0:
            raise ConfigurationError(
                f"{what}: kernel/stride must be >= 1 and padding >= 0, "
                f"got kernel={kernel} stride={stride} padding={padding}")
        if dim + 2 * p < k:
            raise ConfigurationError(
                f"{what}: window {kernel} larger than padded input "
                f"{tuple(d + 2 * q for d, q in zip(shape, padding))} along axis {'THW'[axis]}")


def _pad(x, padding, value=0.0):
    if not any(padding):
        return x
    pt, ph, pw = padding
    return np.pad(x, ((0, 0), (0, 0), (pt, pt), (ph, ph), (pw, pw)), constant_values=value)


def _windows(xp, kernel, stride):
    """View of shape (N, C, To, Ho, Wo, kt, kh, kw); no copy."""
    st, sh, sw = stride
    win = sliding_window_view(xp, kernel, axis=_SPATIAL_AXES)
    return win[:, :, ::st, ::sh, ::sw]


def _scatter_windows(grad_windows, padded_shape, kernel, stride, dtype):
    """Adjoint of :func:`_windows`: sum window gradients back onto the padded input.

    ``grad_windows`` has shape (N, C, To, Ho, Wo, kt, kh, kw).
    """
    gxp = np.zeros(padded_shape, dtype=dtype)
    st, sh, sw = stride
    _, _, to, ho, wo = grad_windows.shape[:5]
    kt, kh, kw = kernel
    for a in range(kt):
        ta = slice(a, a + st * (to - 1) + 1, st)
        for b in range(kh):
            hb = slice(b, b + sh * (ho - 1) + 1, sh)
            for c in range(kw):
                wc = slice(c, c + sw * (wo - 1) + 1, sw)
                gxp[:, :, ta, hb, wc] += grad_windows[..., a, b, c]
    return gxp


def _unpad(gxp, padding):
    pt, ph, pw = padding
    t, h, w = gxp.shape[2:]
    return gxp[:, :, pt:t - pt, ph:h - ph, pw:w - pw]


def conv3d_forward(x, weight, bias=None, stride=1, padding=0):
    """3D cross-correlation with zero padding.

    Args:
        x: input of shape (N, C_in, T, H, W).
        weight: filters of shape (C_out, C_in, kt, kh, kw).
        bias: optional (C_out,) vector.
        stride, padding: int or (t, h, w) triples.

    Returns:
        Array of shape (N, C_out, T', H', W') with
        ``L' = floor((L + 2p - k) / s) + 1`` per axis.
    """
    check_tensor5(x)
    stride = triple(stride, "stride")
    padding = triple(padding, "padding")
    if weight.ndim != 5:
        raise ConfigurationError(f"conv weight must be rank 5, got shape {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise ConfigurationError(
            f"conv3d: input has {x.shape[1]} channels but weight expects {weight.shape[1]}")
    kernel = weight.shape[2:]
    _check_window(x.shape[2:], kernel, stride, padding, "conv3d")
    xp = _pad(x, padding)
    if kernel == (1, 1, 1):
        st, sh, sw = stride
        xs = xp[:, :, ::st, ::sh, ::sw]
        out = np.tensordot(weight[:, :, 0, 0, 0], xs, axes=(1, 1))  # (Cout, N, T, H, W)
        out = out.transpose(1, 0, 2, 3, 4)
    else:
        win = _windows(xp, kernel, stride)
        out = np.tensordot(win, weight, axes=((1, 5, 6, 7), (1, 2, 3, 4)))
        out = out.transpose(0, 4, 1, 2, 3)
    out = np.ascontiguousarray(out)
    if bias is not None:
        out += bias.reshape(1, -1, 1, 1, 1)
    return out


def conv3d_backward(grad_out, x, weight, stride=1, padding=0, has_bias=False, need_input_grad=True):
    """Gradients of ``sum(grad_out * conv3d_forward(x, weight))``.

    Returns:
        ``(grad_input, grad_weight, grad_bias)``; ``grad_input`` is None when
        ``need_input_grad`` is false and ``grad_bias`` is None without a bias.
    """
    stride = triple(stride, "stride")
    padding = triple(padding, "padding")
    kernel = weight.shape[2:]
    expected = (x.shape[0], weight.shape[0]) + tuple(
        output_length(n, k, s, p) for n, k, s, p in zip(x.shape[2:], kernel, stride, padding))
    if grad_out.shape != expected:
        raise ConfigurationError(
            f"conv3d backward: grad_out shape {grad_out.shape} != forward output shape {expected}")
    xp = _pad(x, padding)
    grad_bias = grad_out.sum(axis=(0, 2, 3, 4)) if has_bias else None
    grad_input = None
    if kernel == (1, 1, 1):
        st, sh, sw = stride
        xs = xp[:, :, ::st, ::sh, ::sw]
        gw = np.tensordot(grad_out, xs, axes=((0, 2, 3, 4), (0, 2, 3, 4)))
        grad_weight = gw.reshape(weight.shape)
        if need_input_grad:
            gxp = np.zeros(xp.shape, dtype=x.dtype)
            gxs = np.tensordot(weight[:, :, 0, 0, 0], grad_out, axes=(0, 1))  # (Cin, N, ...)
            gxp[:, :, ::st, ::sh, ::sw][:, :, :expected[2], :expected[3], :expected[4]] = \
                gxs.transpose(1, 0, 2, 3, 4)
            grad_input = _unpad(gxp, padding)
    else:
        win = _windows(xp, kernel, stride)
        grad_weight = np.tensordot(grad_out, win, axes=((0, 2, 3, 4), (0, 2, 3, 4)))
        if need_input_grad:
            gcols = np.tensordot(grad_out, weight, axes=(1, 0))  # (N, To, Ho, Wo, Cin, kt, kh, kw)
            gcols = gcols.transpose(0, 4, 1, 2, 3, 5, 6, 7)
            grad_input = _unpad(_scatter_windows(gcols, xp.shape, kernel, stride, x.dtype), padding)
    if grad_input is not None:
        grad_input = np.ascontiguousarray(grad_input)
    return grad_input, np.ascontiguousarray(grad_weight, dtype=weight.dtype), grad_bias


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train, momentum=0.1, eps=1e-5):
    """Per-channel batch normalisation over (N, T, H, W).

    In train mode ``running_mean``/``running_var`` are updated in place and
    the returned cache holds what :func:`batchnorm_backward` needs.
    """
    check_tensor5(x)
    c = x.shape[1]
    if gamma.shape != (c,):
        raise ConfigurationError(f"batchnorm: {c} input channels but params for {gamma.shape[0]}")
    shape = (1, c, 1, 1, 1)
    if train:
        count = x.size // c
        if count < 2:
            raise ConfigurationError("batchnorm in train mode needs N*T*H*W >= 2 per channel")
        mean = x.mean(axis=(0, 2, 3, 4))
        centered = x - mean.reshape(shape)
        var = (centered * centered).mean(axis=(0, 2, 3, 4))
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = centered * inv_std.reshape(shape)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var * (count / (count - 1))
        cache = (xhat, inv_std)
    else:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        xhat = (x - running_mean.reshape(shape)) * inv_std.reshape(shape)
        cache = (xhat, inv_std)
    out = xhat * gamma.reshape(shape) + beta.reshape(shape)
    return out.astype(x.dtype, copy=False), cache


def batchnorm_backward(grad_out, cache, gamma, train=True):
    xhat, inv_std = cache
    c = grad_out.shape[1]
    shape = (1, c, 1, 1, 1)
    grad_beta = grad_out.sum(axis=(0, 2, 3, 4))
    grad_gamma = (grad_out * xhat).sum(axis=(0, 2, 3, 4))
    if train:
        count = grad_out.size // c
        gxhat = grad_out * gamma.reshape(shape)
        grad_input = (inv_std.reshape(shape) / count) * (
            count * gxhat
            - gxhat.sum(axis=(0, 2, 3, 4)).reshape(shape)
            - xhat * (gxhat * xhat).sum(axis=(0, 2, 3, 4)).reshape(shape))
    else:
        grad_input = grad_out * (gamma * inv_std).reshape(shape)
    return grad_input.astype(grad_out.dtype, copy=False), grad_gamma, grad_beta


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(grad_out, x):
    return grad_out * (x > 0)


def maxpool3d_forward(x, kernel, stride=None, padding=0):
    """Max pooling with -inf padding.

    Ties resolve to the earliest position in (t, h, w) scan order. Returns the
    pooled array and the flat in-window argmax used by the backward pass.
    """
    check_tensor5(x)
    kernel = triple(kernel, "kernel")
    stride = kernel if stride is None else triple(stride, "stride")
    padding = triple(padding, "padding")
    _check_window(x.shape[2:], kernel, stride, padding, "maxpool3d")
    if any(p * 2 > k for p, k in zip(padding, kernel)):
        raise ConfigurationError(f"maxpool3d: padding {padding} exceeds half the kernel {kernel}")
    xp = _pad(x, padding, value=-np.inf)
    win = _windows(xp, kernel, stride)
    flat = win.reshape(win.shape[:5] + (-1,))
    argmax = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), argmax


def maxpool3d_backward(grad_out, argmax, input_shape, kernel, stride=None, padding=0):
    kernel = triple(kernel, "kernel")
    stride = kernel if stride is None else triple(stride, "stride")
    padding = triple(padding, "padding")
    padded = input_shape[:2] + tuple(n + 2 * p for n, p in zip(input_shape[2:], padding))
    gxp = np.zeros(padded, dtype=grad_out.dtype)
    st, sh, sw = stride
    _, _, to, ho, wo = grad_out.shape
    kt, kh, kw = kernel
    j = 0
    for a in range(kt):
        ta = slice(a, a + st * (to - 1) + 1, st)
        for b in range(kh):
            hb = slice(b, b + sh * (ho - 1) + 1, sh)
            for c in range(kw):
                wc = slice(c, c + sw * (wo - 1) + 1, sw)
                gxp[:, :, ta, hb, wc] += np.where(argmax == j, grad_out, 0)
                j += 1
    return np.ascontiguousarray(_unpad(gxp, padding))


def global_avg_pool_forward(x):
    check_tensor5(x)
    return x.mean(axis=(2, 3, 4), keepdims=True)


def global_avg_pool_backward(grad_out, input_shape):
    n = input_shape[2] * input_shape[3] * input_shape[4]
    return np.broadcast_to(grad_out / n, input_shape).copy()


def linear_forward(x, weight, bias):
    """``x @ weight.T + bias`` on (N, C) or (N, C, 1, 1, 1) input."""
    x2 = x.reshape(x.shape[0], -1)
    if x2.shape[1] != weight.shape[1]:
        raise ConfigurationError(
            f"fc: input has {x2.shape[1]} features but weight expects {weight.shape[1]}")
    return x2 @ weight.T + bias


def linear_backward(grad_out, x, weight):
    x2 = x.reshape(x.shape[0], -1)
    grad_input = (grad_out @ weight).reshape(x.shape)
    return grad_input, grad_out.T @ x2, grad_out.sum(axis=0)


def residual_add_forward(a, b, crop=False):
    """Elementwise sum of two branches.

    With ``crop`` the longer branch is truncated at the trailing end of each
    axis so it matches the shorter one (valid-convolution residuals).
    """
    if a.shape == b.shape:
        return a + b
    if not crop or a.shape[:2] != b.shape[:2]:
        raise ConfigurationError(f"residual_add: branch shapes {a.shape} and {b.shape} differ")
    shape = tuple(min(p, q) for p, q in zip(a.shape, b.shape))
    sl = tuple(slice(0, n) for n in shape)
    return a[sl] + b[sl]


def residual_add_backward(grad_out, shape_a, shape_b):
    def expand(shape):
        if shape == grad_out.shape:
            return grad_out
        g = np.zeros(shape, dtype=grad_out.dtype)
        g[tuple(slice(0, n) for n in grad_out.shape)] = grad_out
        return g
    return expand(shape_a), expand(shape_b)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of integer ``labels`` under ``softmax(logits)``.

    Returns ``(loss, grad_logits)``.
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ConfigurationError(
            f"softmax_cross_entropy: logits {logits.shape} / labels {labels.shape} mismatch")
    n, k = logits.shape
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ConfigurationError(f"labels must lie in [0, {k})")
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(logsum - z[rows, labels]))
    grad = np.exp(z - logsum[:, None])
    grad[rows, labels] -= 1.0
    return loss, grad / n


def sigmoid_bce(logits, targets):
    """Mean per-class binary cross-entropy with logits.

    Uses ``max(z, 0) - z*y + log(1 + exp(-|z|))``; returns ``(loss, grad_logits)``.
    """
    logits = np.asarray(logits)
    targets = np.asarray(targets, dtype=logits.dtype)
    if logits.shape != targets.shape or logits.ndim != 2:
        raise ConfigurationError(
            f"sigmoid_bce: logits {logits.shape} and targets {targets.shape} must match (N, K)")
    per = np.maximum(logits, 0) - logits * targets + np.log1p(np.exp(-np.abs(logits)))
    sig = np.where(logits >= 0, 1.0 / (1.0 + np.exp(-np.abs(logits))),
                   np.exp(-np.abs(logits)) / (1.0 + np.exp(-np.abs(logits))))
    return float(per.mean()), ((sig - targets) / logits.size).astype(logits.dtype, copy=False)
