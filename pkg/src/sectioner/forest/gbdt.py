"""Gradient-boosted trees with second-order (Newton) logistic updates."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from sectioner.errors import DegenerateLabels, DimensionMismatch, NumericalInstability
from sectioner.forest.tree import DecisionTree, TreeParams, fit_newton_tree

_P_CLAMP = 1e-12


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    neg = ~pos
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[neg])
    out[neg] = ez / (1.0 + ez)
    return out


@dataclass
class GbdtModel:
    base_logit: float
    trees: list[DecisionTree]
    learning_rate: float
    n_rounds: int
    max_depth: int
    lam: float
    seed: int
    n_features: int
    train_loss_per_round: list[float]

    def decision_logits(self, X: np.ndarray, n_trees: int | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        use = self.trees if n_trees is None else self.trees[:n_trees]
        z = np.full(X.shape[0], self.base_logit, dtype=np.float64)
        for tree in use:
            z += self.learning_rate * tree.predict(X)
        return z

    def predict_proba(self, X: np.ndarray, n_trees: int | None = None) -> np.ndarray:
        return _sigmoid(self.decision_logits(X, n_trees))


def log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, _P_CLAMP, 1.0 - _P_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean())


def fit_gbdt(
    X: np.ndarray,
    y: np.ndarray,
    *,
    n_rounds: int = 100,
    max_depth: int = 3,
    learning_rate: float = 0.1,
    lam: float = 1.0,
    base_logit: float = 0.0,
    seed: int = 0,
) -> GbdtModel:
    """Each round fits a regression tree to g = p - y, h = p(1 - p);
    leaf weight is -G/(H+lam), applied with shrinkage ``learning_rate``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if len(np.unique(y)) < 2:
        warnings.warn("training labels contain a single class", DegenerateLabels)
    params = TreeParams(max_depth=max_depth, min_samples_split=2, max_features=None)

    z = np.full(n, base_logit, dtype=np.float64)
    trees: list[DecisionTree] = []
    losses: list[float] = []
    for _round in range(n_rounds):
        p = np.clip(_sigmoid(z), _P_CLAMP, 1.0 - _P_CLAMP)
        g = p - y
        h = p * (1.0 - p)
        tree = fit_newton_tree(X, g, h, params, lam)
        step = tree.predict(X)
        if not np.all(np.isfinite(step)):
            raise NumericalInstability("non-finite leaf weight during boosting")
        z = z + learning_rate * step
        if not np.all(np.isfinite(z)):
            raise NumericalInstability("non-finite boosting logits")
        trees.append(tree)
        losses.append(log_loss(y, _sigmoid(z)))
    return GbdtModel(
        base_logit=base_logit,
        trees=trees,
        learning_rate=learning_rate,
        n_rounds=n_rounds,
        max_depth=max_depth,
        lam=lam,
        seed=seed,
        n_features=d,
        train_loss_per_round=losses,
    )
