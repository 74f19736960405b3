"""Differentiable dense ops.

Sequence ops take ``(T, D)`` or batched ``(B, T, D)`` inputs; the feature
axis is always last.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .instrument import record
from .rng import RngStream
from .tensor import ConfigError, DimensionError, NumericError, Tensor, as_tensor, make_node

logger = logging.getLogger(__name__)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_node(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_node(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_node(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def matmul(a, b) -> Tensor:
    """Batched product over the last two axes (no broadcasting of batch axes)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shapes {a.shape} and {b.shape} do not agree")
    m, k = a.shape[-2:]
    n = b.shape[-1]
    record(math.prod(a.shape[:-2]) * m * k * n)

    def back(g):
        return g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g

    return make_node(a.data @ b.data, (a, b), back, "matmul")


def linear(x, w, b=None) -> Tensor:
    """out[..., o] = sum_i x[..., i] * w[i, o] + b[o]."""
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise DimensionError(f"linear: input {x.shape} incompatible with weight {w.shape}")
    din, dout = w.shape
    if b is not None:
        b = as_tensor(b)
        if b.shape != (dout,):
            raise DimensionError(f"linear: bias shape {b.shape} != ({dout},)")
    rows = math.prod(x.shape[:-1])
    record(rows * din * dout)
    out = x.data @ w.data
    if b is not None:
        out = out + b.data

    def back(g):
        g2 = g.reshape(rows, dout)
        gx = g @ w.data.T
        gw = x.data.reshape(rows, din).T @ g2
        return (gx, gw) if b is None else (gx, gw, g2.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return make_node(out, parents, back, "linear")


def conv_output_length(length: int, stride: int) -> int:
    return (length - 1) // stride + 1


def _as_batched(x: Tensor) -> tuple[Tensor, bool]:
    if x.ndim == 2:
        return reshape(x, (1,) + x.shape), True
    if x.ndim != 3:
        raise DimensionError(f"expected (T, D) or (B, T, D), got {x.shape}")
    return x, False


def conv1d_strided(x, kernel, bias=None, stride: int = 1) -> Tensor:
    """Temporal convolution, kernel (K, Din, Dout), K//2 zeros padded per side.

    Output length is ceil(T / stride).
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if kernel.ndim != 3:
        raise DimensionError(f"kernel must be (K, Din, Dout), got {kernel.shape}")
    K, din, dout = kernel.shape
    if K % 2 == 0:
        raise ConfigError(f"kernel size must be odd, got {K}")
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    x, squeeze = _as_batched(x)
    B, T, d = x.shape
    if T == 0:
        raise DimensionError("conv1d_strided on an empty sequence")
    if d != din:
        raise DimensionError(f"conv1d_strided: input width {d} != kernel Din {din}")

    if K == 1 and stride == 1:
        out = linear(x, reshape(kernel, (din, dout)), bias)
        return reshape(out, (T, dout)) if squeeze else out

    pad = K // 2
    t_out = conv_output_length(T, stride)
    span = stride * (t_out - 1) + 1
    xp = np.pad(x.data, ((0, 0), (pad, pad), (0, 0)))
    cols = np.stack([xp[:, k : k + span : stride, :] for k in range(K)], axis=2)
    cols = cols.reshape(B * t_out, K * din)
    w2 = kernel.data.reshape(K * din, dout)
    record(B * t_out * K * din * dout)
    out = cols @ w2
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data

    def back(g):
        g2 = g.reshape(B * t_out, dout)
        gcols = (g2 @ w2.T).reshape(B, t_out, K, din)
        gxp = np.zeros_like(xp)
        for k in range(K):
            gxp[:, k : k + span : stride, :] += gcols[:, :, k, :]
        gx = gxp[:, pad : pad + T, :]
        gw = (cols.T @ g2).reshape(K, din, dout)
        return (gx, gw) if bias is None else (gx, gw, g2.sum(axis=0))

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    y = make_node(out.reshape(B, t_out, dout), parents, back, "conv1d_strided")
    return reshape(y, (t_out, dout)) if squeeze else y


def maxpool1d(x, stride: int) -> Tensor:
    """Max over non-overlapping windows of ``stride`` frames, -inf padded on the right."""
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    x = as_tensor(x)
    x, squeeze = _as_batched(x)
    if stride == 1:
        return reshape(x, x.shape[1:]) if squeeze else x
    B, T, D = x.shape
    t_out = -(-T // stride)
    xp = np.pad(x.data, ((0, 0), (0, t_out * stride - T), (0, 0)), constant_values=-np.inf)
    win = xp.reshape(B, t_out, stride, D)
    idx = win.argmax(axis=2)
    out = np.take_along_axis(win, idx[:, :, None, :], axis=2)[:, :, 0, :]

    def back(g):
        gw = np.zeros((B, t_out, stride, D))
        np.put_along_axis(gw, idx[:, :, None, :], g[:, :, None, :], axis=2)
        return (gw.reshape(B, t_out * stride, D)[:, :T, :],)

    y = make_node(out, (x,), back, "maxpool1d")
    return reshape(y, y.shape[1:]) if squeeze else y


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    if np.isnan(x.data).any():
        raise NumericError("softmax input contains NaN")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return make_node(y, (x,), back, "softmax")


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return make_node(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def layer_norm(x, gain, shift, eps: float = 1e-5) -> Tensor:
    """Normalize each row over the last axis (population variance), then affine."""
    x, gain, shift = as_tensor(x), as_tensor(gain), as_tensor(shift)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    lead = tuple(range(x.ndim - 1))

    def back(g):
        gh = g * gain.data
        gx = inv * (gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return make_node(xhat * gain.data + shift.data, (x, gain, shift), back, "layer_norm")


_warned_uninitialized: set[int] = set()


def batch_norm_1d(
    x,
    gain,
    shift,
    stats: dict[str, np.ndarray] | None = None,
    momentum: float = 0.1,
    eps: float = 1e-5,
    mode: str = "train",
) -> Tensor:
    """Per-channel normalization over every axis but the last.

    ``stats`` holds ``running_mean``, ``running_var`` and ``num_updates``;
    train mode updates them in place (unbiased variance for the running
    estimate), eval mode only reads them.
    """
    x, gain, shift = as_tensor(x), as_tensor(gain), as_tensor(shift)
    C = x.shape[-1]
    n = x.data.size // C if C else 0
    lead = tuple(range(x.ndim - 1))
    if mode == "train":
        if n < 1:
            raise DimensionError("batch_norm_1d needs at least one row in train mode")
        mu = x.data.mean(axis=lead)
        xc = x.data - mu
        var = (xc * xc).mean(axis=lead)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = xc * inv
        if stats is not None:
            unbiased = var * n / (n - 1) if n > 1 else var
            stats["running_mean"][...] = (1 - momentum) * stats["running_mean"] + momentum * mu
            stats["running_var"][...] = (1 - momentum) * stats["running_var"] + momentum * unbiased
            stats["num_updates"][...] += 1

        def back(g):
            gh = g * gain.data
            gx = inv * (gh - gh.mean(axis=lead) - xhat * (gh * xhat).mean(axis=lead))
            return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    elif mode == "eval":
        if stats is None:
            raise ConfigError("eval-mode batch norm needs running statistics")
        if int(stats["num_updates"].reshape(-1)[0]) == 0 and id(stats) not in _warned_uninitialized:
            _warned_uninitialized.add(id(stats))
            logger.warning("batch norm evaluated before any running-stat update; using init stats")
        inv = 1.0 / np.sqrt(stats["running_var"] + eps)
        xhat = (x.data - stats["running_mean"]) * inv

        def back(g):
            return g * gain.data * inv, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    else:
        raise ConfigError(f"unknown mode {mode!r}")
    return make_node(xhat * gain.data + shift.data, (x, gain, shift), back, "batch_norm_1d")


def dropout(x, p: float, rng: RngStream | None, mode: str = "train") -> Tensor:
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    x = as_tensor(x)
    if mode != "train" or p == 0.0:
        return x
    if rng is None:
        raise ConfigError("train-mode dropout needs an RngStream")
    mask = (rng.uniform(x.shape) >= p) / (1.0 - p)
    return make_node(x.data * mask, (x,), lambda g: (g * mask,), "dropout")


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    old = x.shape
    return make_node(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape", check=False)


def transpose(x, axes) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return make_node(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),), "transpose", check=False)


def take(x, index) -> Tensor:
    x = as_tensor(x)

    def back(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, index, g)
        return (gx,)

    return make_node(np.array(x.data[index]), (x,), back, "take", check=False)


def sum_all(x) -> Tensor:
    x = as_tensor(x)
    return make_node(np.array(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),), "sum")


def l2_norm(x, axis: int = -1) -> Tensor:
    """Euclidean norm along ``axis``; the subgradient at zero is taken as 0."""
    x = as_tensor(x)
    n = np.sqrt((x.data * x.data).sum(axis=axis))

    def back(g):
        safe = np.where(n > 0, n, 1.0)
        scale = np.where(n > 0, g / safe, 0.0)
        return (np.expand_dims(scale, axis) * x.data,)

    return make_node(n, (x,), back, "l2_norm")
