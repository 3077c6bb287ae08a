"""Feature-importance analyses: MDI and permutation importance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sectioner.errors import OobUnavailable
from sectioner.forest.gbdt import GbdtModel
from sectioner.forest.random_forest import RandomForestModel
from sectioner.forest.tree import DecisionTree, TreeNode


@dataclass(frozen=True)
class ImportanceReport:
    method: str  # mdi | permutation-oob | permutation-holdout
    scores: np.ndarray
    feature_names: tuple[str, ...] | None = None
    repeats: int | None = None
    metric: str | None = None

    def ranking(self) -> list[int]:
        """Feature indices from most to least important (stable on ties)."""
        order = np.argsort(-self.scores, kind="stable")
        return [int(i) for i in order]

    def to_csv_rows(self) -> list[tuple[str, str, str, str]]:
        rows = []
        for rank, idx in enumerate(self.ranking(), start=1):
            name = self.feature_names[idx] if self.feature_names else f"f{idx}"
            rows.append((self.method, name, repr(float(self.scores[idx])), str(rank)))
        return rows


def _tree_mdi(tree: DecisionTree, d: int) -> np.ndarray:
    """Per-feature sum of (node samples / total) * impurity decrease."""
    out = np.zeros(d, dtype=np.float64)
    total = tree.root.n_samples

    def walk(node: TreeNode):
        if node.is_leaf:
            return
        out[node.feature] += (node.n_samples / total) * node.gain
        walk(node.left)
        walk(node.right)

    walk(tree.root)
    return out


def mdi_importance(model: RandomForestModel | GbdtModel, feature_names: tuple[str, ...] | None = None) -> ImportanceReport:
    """Mean decrease in impurity, normalized to sum to 1.

    RF trees contribute Gini decreases, boosting trees contribute split
    gains; both are weighted by the fraction of samples reaching the node,
    summed per feature and averaged over trees.
    """
    d = model.n_features
    per_tree = np.stack([_tree_mdi(t, d) for t in model.trees], axis=0)
    scores = per_tree.mean(axis=0)
    total = scores.sum()
    if total > 0:
        scores = scores / total
    return ImportanceReport(method="mdi", scores=scores, feature_names=feature_names)


def _accuracy(y: np.ndarray, proba: np.ndarray) -> float:
    return float(((proba >= 0.5).astype(np.int64) == np.asarray(y, dtype=np.int64)).mean())


_METRICS = {"accuracy": _accuracy}


def permutation_importance(
    model,
    X: np.ndarray,
    y: np.ndarray,
    *,
    metric: str = "accuracy",
    repeats: int = 10,
    mode: str = "holdout",
    seed: int = 0,
    feature_names: tuple[str, ...] | None = None,
) -> ImportanceReport:
    """Mean drop in the metric when one feature's column is shuffled.

    ``holdout`` scores any model on (X, y) as given.  ``oob`` follows the
    out-of-bag procedure: each tree is scored on its own OOB rows before
    and after permuting the feature within those rows, and the decrease is
    averaged over trees; it requires a random forest with OOB sets.
    """
    if metric not in _METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    score = _METRICS[metric]
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    rng = np.random.default_rng(seed)

    if mode == "holdout":
        baseline = score(y, model.predict_proba(X))
        drops = np.zeros((repeats, d), dtype=np.float64)
        for r in range(repeats):
            for f in range(d):
                perm = rng.permutation(n)
                Xp = X.copy()
                Xp[:, f] = X[perm, f]
                drops[r, f] = baseline - score(y, model.predict_proba(Xp))
        scores = drops.mean(axis=0)
    elif mode == "oob":
        if not isinstance(model, RandomForestModel) or all(o.size == 0 for o in model.oob_indices):
            raise OobUnavailable("out-of-bag importance needs a random forest with recorded OOB sets")
        usable = [(tree, oob) for tree, oob in zip(model.trees, model.oob_indices) if oob.size > 0]
        baselines = [score(y[oob], tree.predict(X[oob])) for tree, oob in usable]
        drops = np.zeros((repeats, d), dtype=np.float64)
        for r in range(repeats):
            for f in range(d):
                per_tree = np.zeros(len(usable), dtype=np.float64)
                for t, (tree, oob) in enumerate(usable):
                    perm = rng.permutation(oob.size)
                    Xp = X[oob].copy()
                    Xp[:, f] = Xp[perm, f]
                    per_tree[t] = baselines[t] - score(y[oob], tree.predict(Xp))
                drops[r, f] = per_tree.mean()
        scores = drops.mean(axis=0)
    else:
        raise ValueError(f"unknown permutation mode {mode!r}")

    return ImportanceReport(
        method=f"permutation-{mode}",
        scores=scores,
        feature_names=feature_names,
        repeats=repeats,
        metric=metric,
    )
