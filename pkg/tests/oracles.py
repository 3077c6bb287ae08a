"""Independent reference implementations used as test oracles.

Everything here is written naively (scalar loops, exhaustive search) and
deliberately shares no code with the package, so a bug would have to be
made twice, in two different shapes, to slip through.
"""

from __future__ import annotations

import math

import numpy as np


# -- imaging -----------------------------------------------------------------


def naive_width(length: int) -> int:
    if length < 1536:
        return 8
    if length < 10 * 1024:
        return 32
    if length < 30 * 1024:
        return 64
    if length < 60 * 1024:
        return 128
    if length < 100 * 1024:
        return 256
    if length < 200 * 1024:
        return 384
    if length < 500 * 1024:
        return 512
    if length < 1000 * 1024:
        return 768
    return 1024


def naive_grayscale(data: bytes) -> np.ndarray:
    width = naive_width(len(data))
    height = math.ceil(len(data) / width)
    rows = []
    for r in range(height):
        row = []
        for c in range(width):
            i = r * width + c
            row.append(data[i] if i < len(data) else 0)
        rows.append(row)
    return np.array(rows, dtype=np.uint8)


def naive_bilinear_64(img: np.ndarray) -> np.ndarray:
    """Scalar bilinear resample with half-pixel centers, round half up."""
    in_h, in_w = img.shape
    out = np.zeros((64, 64), dtype=np.uint8)
    for i in range(64):
        for j in range(64):
            y = (i + 0.5) * in_h / 64 - 0.5
            x = (j + 0.5) * in_w / 64 - 0.5
            y = min(max(y, 0.0), in_h - 1.0)
            x = min(max(x, 0.0), in_w - 1.0)
            y0 = math.floor(y)
            x0 = math.floor(x)
            y1 = min(y0 + 1, in_h - 1)
            x1 = min(x0 + 1, in_w - 1)
            wy = y - y0
            wx = x - x0
            v00 = float(img[y0, x0])
            v01 = float(img[y0, x1])
            v10 = float(img[y1, x0])
            v11 = float(img[y1, x1])
            value = (
                (1.0 - wy) * (1.0 - wx) * v00
                + (1.0 - wy) * wx * v01
                + wy * (1.0 - wx) * v10
                + wy * wx * v11
            )
            out[i, j] = int(min(max(math.floor(value + 0.5), 0.0), 255.0))
    return out


def naive_image(data: bytes) -> np.ndarray:
    return naive_bilinear_64(naive_grayscale(data))


# -- convolution ---------------------------------------------------------------


def conv2d_direct(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Brute-force same-padding 3x3 convolution over all positions."""
    n, c, h, wd = x.shape
    f = w.shape[0]
    out = np.zeros((n, f, h, wd), dtype=np.float64)
    for ni in range(n):
        for fi in range(f):
            for yi in range(h):
                for xi in range(wd):
                    acc = float(b[fi])
                    for ci in range(c):
                        for ky in range(3):
                            for kx in range(3):
                                sy = yi + ky - 1
                                sx = xi + kx - 1
                                if 0 <= sy < h and 0 <= sx < wd:
                                    acc += float(w[fi, ci, ky, kx]) * float(x[ni, ci, sy, sx])
                    out[ni, fi, yi, xi] = acc
    return out


# -- trees -----------------------------------------------------------------


def _gini(c0: int, c1: int) -> float:
    n = c0 + c1
    p0 = c0 / n
    p1 = c1 / n
    return 1.0 - p0 * p0 - p1 * p1


def exhaustive_tree(X: np.ndarray, y: np.ndarray, depth: int = 0, max_depth: int | None = None):
    """Exhaustive-search CART: every (feature, midpoint) split at every node.

    Returns nested tuples: ('leaf', n, impurity, value) or
    ('node', n, impurity, value, feature, threshold, gain, left, right).
    Ties break to the lowest feature index, then the lowest threshold.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    c1 = int(y.sum())
    c0 = n - c1
    impurity = _gini(c0, c1)
    value = c1 / n
    if impurity == 0.0 or n < 2 or (max_depth is not None and depth >= max_depth):
        return ("leaf", n, impurity, value)

    best = None  # (gain, feature, threshold)
    for f in range(X.shape[1]):
        distinct = sorted(set(X[:, f].tolist()))
        for v1, v2 in zip(distinct, distinct[1:]):
            thr = (v1 + v2) / 2.0
            left = X[:, f] <= thr
            nl = int(left.sum())
            nr = n - nl
            if nl == 0 or nr == 0:
                continue
            cl1 = int(y[left].sum())
            cl0 = nl - cl1
            cr1 = c1 - cl1
            cr0 = nr - cr1
            gl = _gini(cl0, cl1)
            gr = _gini(cr0, cr1)
            gain = impurity - (nl * gl + nr * gr) / n
            if gain > 0.0 and (best is None or gain > best[0]):
                best = (gain, f, thr)
    if best is None:
        return ("leaf", n, impurity, value)
    gain, f, thr = best
    left = X[:, f] <= thr
    return (
        "node",
        n,
        impurity,
        value,
        f,
        thr,
        gain,
        exhaustive_tree(X[left], y[left], depth + 1, max_depth),
        exhaustive_tree(X[~left], y[~left], depth + 1, max_depth),
    )


def tree_to_tuple(node):
    """Package TreeNode -> the oracle's tuple shape for exact comparison."""
    if node.is_leaf:
        return ("leaf", node.n_samples, node.impurity, node.value)
    return (
        "node",
        node.n_samples,
        node.impurity,
        node.value,
        node.feature,
        node.threshold,
        node.gain,
        tree_to_tuple(node.left),
        tree_to_tuple(node.right),
    )


# -- votes -----------------------------------------------------------------


def counting_vote(values, mode: str) -> tuple[int, bool]:
    """(label, abstained) by direct application of the stated rule."""
    present = [v for v in values if v != -1]
    if not present:
        return 0, True
    votes = sum(1 for v in present if v >= 0.5)
    if mode == "geq3":
        return (1 if votes >= 3 else 0), False
    return (1 if votes > 3 else 0), False


# -- metrics / splits ------------------------------------------------------


def largest_remainder_oracle(total: int, fractions) -> list[int]:
    exact = [f * total for f in fractions]
    floors = [math.floor(v) for v in exact]
    remainders = [(exact[i] - floors[i], -i) for i in range(len(fractions))]
    order = sorted(range(len(fractions)), key=lambda i: remainders[i], reverse=True)
    for i in range(total - sum(floors)):
        floors[order[i]] += 1
    return floors


def scalar_log_loss(y, p) -> float:
    total = 0.0
    for yi, pi in zip(y, p):
        pi = min(max(pi, 1e-12), 1 - 1e-12)
        total += -(yi * math.log(pi) + (1 - yi) * math.log(1 - pi))
    return total / len(y)
