"""Differentiable network primitives built on :mod:`.tensor`."""

from __future__ import annotations

import numpy as np

from .. import _kernels
from .tensor import (
    ConfigurationError,
    DimensionError,
    Tensor,
    _result,
    as_tensor,
    log_branch,
    max_,
    mean,
    mse,
    relu,
    sigmoid,
    softmax,
)

__all__ = [
    "linear",
    "softmax",
    "conv2d",
    "conv_output_size",
    "batch_norm",
    "layer_norm",
    "normalize",
    "activation",
    "pool",
    "dropout",
    "mse",
]

EPS = 1e-5


def linear(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    x = as_tensor(x)
    if x.shape[-1] != W.shape[0]:
        raise DimensionError(f"linear: input {x.shape} incompatible with weight {W.shape}")
    if b is not None and b.shape != (W.shape[1],):
        raise DimensionError(f"linear: bias {b.shape} incompatible with weight {W.shape}")
    if x.ndim == 1:
        y = (x.reshape(1, -1) @ W).reshape(W.shape[1])
    else:
        y = x @ W
    return y + b if b is not None else y


def conv_output_size(size: int, k: int, stride: int, padding: int) -> int:
    span = size + 2 * padding - k
    if span < 0 or span % stride:
        raise ConfigurationError(
            f"output size (size {size} + 2*{padding} - {k}) / {stride} + 1 is not a positive integer"
        )
    return span // stride + 1


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Zero-padded 2-D cross-correlation.

    ``x`` is (C_in, H, W) or (N, C_in, H, W); ``weight`` is (C_out, C_in, k, k).
    """
    x = as_tensor(x)
    squeeze = x.ndim == 3
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 4:
        raise DimensionError(f"conv2d: expected (C,H,W) or (N,C,H,W) input, got {x.shape}")
    n, c_in, h, w = xd.shape
    c_out, c_w, k, k2 = weight.shape
    if c_w != c_in or k != k2:
        raise DimensionError(f"conv2d: input {x.shape} incompatible with kernel {weight.shape}")
    ho = conv_output_size(h, k, stride, padding)
    wo = conv_output_size(w, k, stride, padding)

    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else xd
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    # (N, Ho, Wo, C, k, k) -> rows of patches
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n, ho * wo, c_in * k * k)
    wmat = weight.data.reshape(c_out, -1)
    out = cols @ wmat.T
    if bias is not None:
        out = out + bias.data
    out = out.transpose(0, 2, 1).reshape(n, c_out, ho, wo)
    if squeeze:
        out = out[0]

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        g4 = g[None] if squeeze else g
        gmat = g4.reshape(n, c_out, ho * wo).transpose(0, 2, 1)  # (N, HoWo, C_out)
        gw = np.einsum("npo,npk->ok", gmat, cols).reshape(weight.shape) if weight.requires_grad else None
        gb = gmat.sum(axis=(0, 1)) if bias is not None and bias.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (gmat @ wmat).reshape(n, ho, wo, c_in, k, k).transpose(0, 3, 1, 2, 4, 5)
            gxp = _kernels.col2im(gcols, xp.shape[2], xp.shape[3], stride)
            if padding:
                gxp = gxp[:, :, padding:-padding, padding:-padding]
            gx = gxp[0] if squeeze else gxp
        return (gx, gw) if bias is None else (gx, gw, gb)

    return _result(out, parents, backward, "conv2d")


def _affine_shape(x_shape, reduce_axes):
    return tuple(1 if i in reduce_axes else s for i, s in enumerate(x_shape))


def _normalize_core(x: Tensor, gamma, beta, reduce_axes, mu, var, eps, op, affine_shape=None):
    """Shared forward/backward for batch and layer normalization.

    ``affine_shape`` is how gamma/beta broadcast against ``x``; it defaults to
    the statistics shape (batch norm). Layer norm passes (1, ..., 1, d).
    """
    reduce_axes = tuple(a % x.ndim for a in reduce_axes)
    affine_shape = affine_shape or _affine_shape(x.shape, reduce_axes)
    affine_sum = tuple(i for i, s in enumerate(affine_shape) if s == 1)
    count = int(np.prod([x.shape[a] for a in reduce_axes]))
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    g_data = gamma.data.reshape(affine_shape) if gamma is not None else 1.0
    out = xhat * g_data
    if beta is not None:
        out = out + beta.data.reshape(affine_shape)
    out = out.astype(x.dtype, copy=False)
    parents = [x] + [p for p in (gamma, beta) if p is not None]
    batch_stats = op != "normalize_eval"

    def backward(gr):
        grads = []
        dxhat = gr * g_data
        if x.requires_grad:
            if batch_stats:
                s1 = dxhat.sum(axis=reduce_axes, keepdims=True)
                s2 = (dxhat * xhat).sum(axis=reduce_axes, keepdims=True)
                gx = inv / count * (count * dxhat - s1 - xhat * s2)
            else:
                gx = dxhat * inv
            grads.append(gx)
        else:
            grads.append(None)
        if gamma is not None:
            grads.append((gr * xhat).sum(axis=affine_sum).reshape(gamma.shape))
        if beta is not None:
            grads.append(gr.sum(axis=affine_sum).reshape(beta.shape))
        return tuple(grads)

    return _result(out, parents, backward, op)


def batch_norm(
    x: Tensor,
    gamma: Tensor | None,
    beta: Tensor | None,
    reduce_axes,
    running_mean: np.ndarray | None = None,
    running_var: np.ndarray | None = None,
    training: bool = True,
    momentum: float = 0.1,
    eps: float = EPS,
) -> Tensor:
    """Standardise over ``reduce_axes`` (which must include the batch axis 0).

    In training mode batch statistics are used and the running buffers, if
    given, are updated in place. In eval mode the running buffers are used.
    """
    x = as_tensor(x)
    reduce_axes = tuple(sorted(a % x.ndim for a in reduce_axes))
    bshape = _affine_shape(x.shape, reduce_axes)
    if training:
        if x.shape[0] < 2:
            raise ConfigurationError(f"batch normalization in train mode needs batch size >= 2, got {x.shape[0]}")
        mu = x.data.mean(axis=reduce_axes, keepdims=True)
        var = x.data.var(axis=reduce_axes, keepdims=True)
        if running_mean is not None:
            count = x.data.size // mu.size
            unbiased = var * count / max(count - 1, 1)
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu.reshape(running_mean.shape)
            running_var *= 1.0 - momentum
            running_var += momentum * unbiased.reshape(running_var.shape)
        return _normalize_core(x, gamma, beta, reduce_axes, mu, var, eps, "batch_norm")
    if running_mean is None or running_var is None:
        raise ConfigurationError("batch normalization in eval mode needs running statistics")
    mu = running_mean.reshape(bshape)
    var = running_var.reshape(bshape)
    return _normalize_core(x, gamma, beta, reduce_axes, mu, var, eps, "normalize_eval")


def layer_norm(x: Tensor, gamma: Tensor | None = None, beta: Tensor | None = None, eps: float = EPS) -> Tensor:
    x = as_tensor(x)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    affine = (1,) * (x.ndim - 1) + (x.shape[-1],)
    return _normalize_core(x, gamma, beta, (x.ndim - 1,), mu, var, eps, "layer_norm", affine)


def normalize(x, kind: str = "batch", stats_mode: str = "train", gamma=None, beta=None, **kw) -> Tensor:
    """Dispatch to batch or layer normalization.

    Batch kind normalizes over axis 0 by default (``reduce_axes`` overrides).
    """
    if kind == "layer":
        return layer_norm(x, gamma, beta, eps=kw.get("eps", EPS))
    if kind != "batch":
        raise ConfigurationError(f"unknown normalization kind {kind!r}")
    if stats_mode not in ("train", "eval"):
        raise ConfigurationError(f"unknown stats mode {stats_mode!r}")
    return batch_norm(
        x,
        gamma,
        beta,
        kw.get("reduce_axes", (0,)),
        kw.get("running_mean"),
        kw.get("running_var"),
        training=stats_mode == "train",
        momentum=kw.get("momentum", 0.1),
        eps=kw.get("eps", EPS),
    )


def activation(x: Tensor, kind: str = "relu") -> Tensor:
    if kind == "relu":
        return relu(as_tensor(x))
    if kind == "sigmoid":
        return sigmoid(as_tensor(x))
    raise ConfigurationError(f"unknown activation {kind!r}")


def pool(x: Tensor, kind: str = "max", scope: str = "global", axes=(-2, -1), window: int = 2, stride: int | None = None) -> Tensor:
    """Max or average pooling.

    ``scope="global"`` reduces ``axes`` entirely. ``scope="window"`` slides a
    ``window``x``window`` patch over the last two axes.
    """
    x = as_tensor(x)
    if kind not in ("max", "avg"):
        raise ConfigurationError(f"unknown pooling kind {kind!r}")
    if scope == "global":
        axes = tuple(a % x.ndim for a in axes)
        return max_(x, axis=axes) if kind == "max" else mean(x, axis=axes)
    if scope != "window":
        raise ConfigurationError(f"unknown pooling scope {scope!r}")
    stride = stride or window
    h, w = x.shape[-2:]
    ho = conv_output_size(h, window, stride, 0)
    wo = conv_output_size(w, window, stride, 0)
    win = np.lib.stride_tricks.sliding_window_view(x.data, (window, window), axis=(-2, -1))[..., ::stride, ::stride, :, :]
    flat = win.reshape(win.shape[:-2] + (window * window,))
    if kind == "max":
        idx = flat.argmax(axis=-1)
        log_branch(idx)
        out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    else:
        out = flat.mean(axis=-1)

    def backward(g):
        gx = np.zeros_like(x.data)
        for ki in range(window):
            for kj in range(window):
                if kind == "max":
                    contrib = g * (idx == ki * window + kj)
                else:
                    contrib = g / (window * window)
                gx[..., ki : ki + stride * ho : stride, kj : kj + stride * wo : stride] += contrib
        return (gx,)

    return _result(np.ascontiguousarray(out), (x,), backward, f"{kind}_pool")


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool = True) -> Tensor:
    x = as_tensor(x)
    if not training or rate <= 0.0:
        return x
    if rng is None:
        raise ConfigurationError("dropout in training mode needs a seeded generator")
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return _result(x.data * keep, (x,), lambda g: (g * keep,), "dropout")
