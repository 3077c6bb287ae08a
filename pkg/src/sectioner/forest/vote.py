"""Majority-vote fusion baselines.

A present section votes malware when its score is >= 0.5; absent sections
(score -1) never vote.  The file is malware when the vote count clears the
mode's threshold (>= 3 or > 3).  An all-absent vector yields benign with
the ``abstained`` flag set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sectioner.errors import DimensionMismatch

VOTE_MODES = ("geq3", "gt3")
SECTION_VOTE_THRESHOLD = 0.5


@dataclass(frozen=True)
class VoteResult:
    label: int
    votes: int
    present: int
    abstained: bool


def majority_vote(v: np.ndarray, mode: str) -> VoteResult:
    if mode not in VOTE_MODES:
        raise ValueError(f"unknown vote mode {mode!r}")
    v = np.asarray(v, dtype=np.float64)
    present = v != -1.0
    votes = int((v[present] >= SECTION_VOTE_THRESHOLD).sum())
    if not present.any():
        return VoteResult(label=0, votes=0, present=0, abstained=True)
    if mode == "geq3":
        label = int(votes >= 3)
    else:
        label = int(votes > 3)
    return VoteResult(label=label, votes=votes, present=int(present.sum()), abstained=False)


@dataclass
class VoteModel:
    mode: str
    n_features: int = 6

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.array([float(majority_vote(row, self.mode).label) for row in X])
