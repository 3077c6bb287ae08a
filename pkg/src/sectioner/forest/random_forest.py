"""Random forest over score vectors with recorded out-of-bag sets."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from sectioner.errors import DegenerateLabels, DimensionMismatch
from sectioner.forest.tree import DecisionTree, TreeParams, fit_tree


@dataclass
class RandomForestModel:
    trees: list[DecisionTree]
    oob_indices: list[np.ndarray]  # per tree, row indices never bootstrapped
    n_trees: int
    max_features: int
    seed: int
    n_features: int
    bootstrap: bool = True

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        votes = np.stack([tree.predict(X) for tree in self.trees], axis=0)
        return votes.mean(axis=0)


def _tree_rngs(seed: int, n_trees: int) -> list[np.random.Generator]:
    # Child streams come from SeedSequence spawning, so per-tree fitting is
    # reproducible no matter how trees are scheduled.
    children = np.random.SeedSequence(seed).spawn(n_trees)
    return [np.random.default_rng(s) for s in children]


def fit_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    *,
    n_trees: int = 100,
    max_features: int | None = None,
    seed: int = 0,
    bootstrap: bool = True,
) -> RandomForestModel:
    """Bagged Gini trees; prediction is the mean of per-tree leaf values.

    ``bootstrap=False`` is a test hook that fits every tree on the full
    sample (OOB sets are then empty).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    if len(np.unique(y)) < 2:
        warnings.warn("training labels contain a single class", DegenerateLabels)
    if max_features is None:
        max_features = math.ceil(math.sqrt(d))
    params = TreeParams(max_depth=None, min_samples_split=2, max_features=max_features)

    trees: list[DecisionTree] = []
    oob: list[np.ndarray] = []
    for rng in _tree_rngs(seed, n_trees):
        if bootstrap:
            idx = rng.integers(0, n, size=n)
            mask = np.ones(n, dtype=bool)
            mask[idx] = False
            oob.append(np.nonzero(mask)[0])
        else:
            idx = np.arange(n)
            oob.append(np.array([], dtype=np.int64))
        trees.append(fit_tree(X[idx], y[idx], params, rng=rng))
    return RandomForestModel(
        trees=trees,
        oob_indices=oob,
        n_trees=n_trees,
        max_features=max_features,
        seed=seed,
        n_features=d,
        bootstrap=bootstrap,
    )


def oob_predictions(model: RandomForestModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Aggregated OOB probability per row and a mask of covered rows."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    total = np.zeros(n)
    count = np.zeros(n)
    for tree, oob in zip(model.trees, model.oob_indices):
        if oob.size == 0:
            continue
        total[oob] += tree.predict(X[oob])
        count[oob] += 1
    covered = count > 0
    proba = np.zeros(n)
    proba[covered] = total[covered] / count[covered]
    return proba, covered


def oob_accuracy(model: RandomForestModel, X: np.ndarray, y: np.ndarray) -> float:
    proba, covered = oob_predictions(model, X)
    if not covered.any():
        return float("nan")
    pred = (proba[covered] >= 0.5).astype(np.int64)
    return float((pred == np.asarray(y)[covered]).mean())
