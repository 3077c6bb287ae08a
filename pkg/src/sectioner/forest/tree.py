"""CART trees over score vectors.

Two criteria share one greedy builder: Gini impurity for classification
trees (random forest) and the second-order gain with Newton leaf weights
for boosting trees.  Candidate thresholds are midpoints between
consecutive distinct sorted feature values, so the -1 absence sentinel
participates as an ordinary value that sorts below every probability.

Ties between equally good splits go to the lowest feature index, then the
lowest threshold.  The split search is order-invariant: permuting the rows
of the training set yields a structurally identical tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class TreeNode:
    n_samples: int
    impurity: float
    value: float
    feature: Optional[int] = None
    threshold: Optional[float] = None
    gain: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": self.value, "n": self.n_samples, "impurity": self.impurity}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "gain": self.gain,
            "n": self.n_samples,
            "impurity": self.impurity,
            "value": self.value,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "leaf" in d:
            return cls(n_samples=d["n"], impurity=d["impurity"], value=d["leaf"])
        return cls(
            n_samples=d["n"],
            impurity=d["impurity"],
            value=d["value"],
            feature=d["feature"],
            threshold=d["threshold"],
            gain=d["gain"],
            left=cls.from_dict(d["left"]),
            right=cls.from_dict(d["right"]),
        )


@dataclass(frozen=True)
class TreeParams:
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    max_features: Optional[int] = None


@dataclass
class DecisionTree:
    root: TreeNode
    n_features: int
    criterion: str  # "gini" | "newton"

    def predict_one(self, x: np.ndarray) -> float:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.value

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.array([self.predict_one(row) for row in X], dtype=np.float64)


def _gini_from_counts(c0: int, c1: int) -> float:
    n = c0 + c1
    p0 = c0 / n
    p1 = c1 / n
    return 1.0 - p0 * p0 - p1 * p1


def _best_split_gini(X: np.ndarray, y: np.ndarray, features) -> tuple[int, float, float] | None:
    """Best (feature, threshold, gain) under Gini, or None if no gain > 0.

    Per-candidate arithmetic is written exactly as the textbook formula so
    an exhaustive enumeration computes bit-identical gains.
    """
    n = y.shape[0]
    c1_total = int(y.sum())
    c0_total = n - c1_total
    parent = _gini_from_counts(c0_total, c1_total)
    best: tuple[int, float, float] | None = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        vals = X[order, f]
        labels = y[order]
        boundaries = np.nonzero(vals[:-1] != vals[1:])[0]
        if boundaries.size == 0:
            continue
        cum1 = np.cumsum(labels)
        for k in boundaries:
            nl = int(k) + 1
            nr = n - nl
            cl1 = int(cum1[k])
            cl0 = nl - cl1
            cr1 = c1_total - cl1
            cr0 = nr - cr1
            gl = _gini_from_counts(cl0, cl1)
            gr = _gini_from_counts(cr0, cr1)
            gain = parent - (nl * gl + nr * gr) / n
            if gain > 0.0 and (best is None or gain > best[2]):
                threshold = (vals[k] + vals[k + 1]) / 2.0
                best = (int(f), float(threshold), float(gain))
    return best


def _best_split_newton(
    X: np.ndarray, g: np.ndarray, h: np.ndarray, features, lam: float
) -> tuple[int, float, float] | None:
    """Best split by the second-order gain 0.5*(GL^2/(HL+lam) + ...)."""
    g_total = float(g.sum())
    h_total = float(h.sum())
    parent_term = (g_total * g_total) / (h_total + lam)
    best: tuple[int, float, float] | None = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        vals = X[order, f]
        cum_g = np.cumsum(g[order])
        cum_h = np.cumsum(h[order])
        boundaries = np.nonzero(vals[:-1] != vals[1:])[0]
        for k in boundaries:
            gl = float(cum_g[k])
            hl = float(cum_h[k])
            gr = g_total - gl
            hr = h_total - hl
            gain = 0.5 * ((gl * gl) / (hl + lam) + (gr * gr) / (hr + lam) - parent_term)
            if gain > 0.0 and (best is None or gain > best[2]):
                threshold = (vals[k] + vals[k + 1]) / 2.0
                best = (int(f), float(threshold), float(gain))
    return best


def _candidate_features(d: int, params: TreeParams, rng: np.random.Generator | None):
    if params.max_features is None or params.max_features >= d:
        return range(d)
    if rng is None:
        raise ValueError("max_features subsampling needs an rng")
    subset = rng.choice(d, size=params.max_features, replace=False)
    return sorted(int(f) for f in subset)


def _build_gini(X, y, depth, params, rng) -> TreeNode:
    n = y.shape[0]
    c1 = int(y.sum())
    impurity = _gini_from_counts(n - c1, c1)
    value = c1 / n
    node = TreeNode(n_samples=n, impurity=impurity, value=value)
    if impurity == 0.0 or n < params.min_samples_split:
        return node
    if params.max_depth is not None and depth >= params.max_depth:
        return node
    best = _best_split_gini(X, y, _candidate_features(X.shape[1], params, rng), )
    if best is None:
        return node
    f, threshold, gain = best
    mask = X[:, f] <= threshold
    node.feature = f
    node.threshold = threshold
    node.gain = gain
    node.left = _build_gini(X[mask], y[mask], depth + 1, params, rng)
    node.right = _build_gini(X[~mask], y[~mask], depth + 1, params, rng)
    return node


def _build_newton(X, g, h, depth, params, lam, rng) -> TreeNode:
    n = g.shape[0]
    g_total = float(g.sum())
    h_total = float(h.sum())
    # Node objective; stored as the impurity analogue for boosting trees.
    impurity = -0.5 * (g_total * g_total) / (h_total + lam)
    value = -g_total / (h_total + lam)
    node = TreeNode(n_samples=n, impurity=impurity, value=value)
    if n < params.min_samples_split:
        return node
    if params.max_depth is not None and depth >= params.max_depth:
        return node
    best = _best_split_newton(X, g, h, _candidate_features(X.shape[1], params, rng), lam)
    if best is None:
        return node
    f, threshold, gain = best
    mask = X[:, f] <= threshold
    node.feature = f
    node.threshold = threshold
    node.gain = gain
    node.left = _build_newton(X[mask], g[mask], h[mask], depth + 1, params, lam, rng)
    node.right = _build_newton(X[~mask], g[~mask], h[~mask], depth + 1, params, lam, rng)
    return node


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: TreeParams = TreeParams(),
    *,
    rng: np.random.Generator | None = None,
) -> DecisionTree:
    """Greedy Gini classification tree; leaf value = malware fraction."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, d) with matching labels")
    root = _build_gini(X, y, 0, params, rng)
    return DecisionTree(root=root, n_features=X.shape[1], criterion="gini")


def fit_newton_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    params: TreeParams,
    lam: float,
    *,
    rng: np.random.Generator | None = None,
) -> DecisionTree:
    """Regression tree on gradients/hessians; leaf value = -G/(H+lam)."""
    X = np.asarray(X, dtype=np.float64)
    root = _build_newton(X, np.asarray(g, dtype=np.float64), np.asarray(h, dtype=np.float64), 0, params, lam, rng)
    return DecisionTree(root=root, n_features=X.shape[1], criterion="newton")
