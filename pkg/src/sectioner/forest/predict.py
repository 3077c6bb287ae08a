"""Uniform prediction over any fusion model."""

from __future__ import annotations

import numpy as np

from sectioner.errors import DimensionMismatch
from sectioner.forest.tree import DecisionTree


def predict(model, v: np.ndarray) -> float:
    """Malware probability for one score vector; label is proba >= 0.5."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a single score vector, got shape {v.shape}")
    if isinstance(model, DecisionTree):
        if v.shape[0] != model.n_features:
            raise DimensionMismatch(f"expected {model.n_features} features, got {v.shape[0]}")
        return float(model.predict_one(v))
    return float(model.predict_proba(v[None, :])[0])
