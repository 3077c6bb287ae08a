"""Forward/backward primitives for the small convolutional classifier.

Everything is plain numpy.  Convolutions use the nine-shift formulation
(one matmul per kernel offset) which keeps memory flat and stays
deterministic.  Max-pool ties route gradients to the first maximum, so
backward passes are reproducible bit for bit.
"""

from __future__ import annotations

import numpy as np

from sectioner.errors import ShapeMismatch


def conv3x3_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-padding 3x3 convolution, stride 1, via im2col + one GEMM.

    x: (N, C, H, W); w: (F, C, 3, 3); b: (F,).  Returns (out, cache).
    """
    if x.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"conv input {x.shape} incompatible with kernel {w.shape}")
    n, c, h, wd = x.shape
    f = w.shape[0]
    xp = np.zeros((n, c, h + 2, wd + 2), dtype=x.dtype)
    xp[:, :, 1 : h + 1, 1 : wd + 1] = x
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * h * wd, c * 9)
    out = cols @ w.reshape(f, c * 9).T + b
    out = out.reshape(n, h, wd, f).transpose(0, 3, 1, 2)
    return out, (cols, w, x.shape)


def conv3x3_backward(dout: np.ndarray, cache):
    cols, w, x_shape = cache
    n, c, h, wd = x_shape
    f = w.shape[0]
    dout_r = np.ascontiguousarray(dout.transpose(0, 2, 3, 1)).reshape(n * h * wd, f)
    dw = (cols.T @ dout_r).T.reshape(f, c, 3, 3)
    db = dout_r.sum(axis=0)
    dcols = dout_r @ w.reshape(f, c * 9)
    dwin = dcols.reshape(n, h, wd, c, 3, 3).transpose(0, 3, 1, 2, 4, 5)
    dxp = np.zeros((n, c, h + 2, wd + 2), dtype=dout.dtype)
    for i in range(3):
        for j in range(3):
            dxp[:, :, i : i + h, j : j + wd] += dwin[:, :, :, :, i, j]
    dx = dxp[:, :, 1 : h + 1, 1 : wd + 1]
    return dx, dw, db


def relu_forward(x: np.ndarray):
    out = np.maximum(x, 0)
    return out, x


def relu_backward(dout: np.ndarray, cache):
    x = cache
    return np.where(x > 0, dout, 0)


def maxpool2_forward(x: np.ndarray):
    """2x2 max pooling, stride 2; H and W must be even."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeMismatch(f"pool input {x.shape} not divisible by 2")
    h2, w2 = h // 2, w // 2
    xr = x.reshape(n, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2, w2, 4)
    idx = xr.argmax(axis=-1)
    out = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]
    return out, (idx, x.shape)


def maxpool2_backward(dout: np.ndarray, cache):
    idx, x_shape = cache
    n, c, h, w = x_shape
    h2, w2 = h // 2, w // 2
    dxr = np.zeros((n, c, h2, w2, 4), dtype=dout.dtype)
    np.put_along_axis(dxr, idx[..., None], dout[..., None], axis=-1)
    return dxr.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x: (N, D); w: (D, K); b: (K,)."""
    if x.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"dense input {x.shape} incompatible with weight {w.shape}")
    return x @ w + b, (x, w)


def dense_backward(dout: np.ndarray, cache):
    x, w = cache
    dw = x.T @ dout
    db = dout.sum(axis=0)
    dx = dout @ w.T
    return dx, dw, db


def dropout_forward(x: np.ndarray, rate: float, rng: np.random.Generator | None, training: bool):
    """Inverted dropout: surviving activations scaled by 1/(1-rate) at
    train time so inference needs no adjustment."""
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    keep = (rng.random(x.shape) >= rate).astype(x.dtype)
    scale = x.dtype.type(1.0 / (1.0 - rate))
    return x * keep * scale, keep * scale


def dropout_backward(dout: np.ndarray, cache):
    if cache is None:
        return dout
    return dout * cache


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss_from_logits(z: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy, computed stably from logits."""
    per = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return float(per.mean())


def bce_grad_from_probs(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d(mean BCE)/d logit = (p - y) / N."""
    return (p - y) / p.shape[0]
