"""Fusion-model persistence: versioned JSON with nested node records."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from sectioner.errors import IntegrityError
from sectioner.forest.gbdt import GbdtModel
from sectioner.forest.random_forest import RandomForestModel
from sectioner.forest.tree import DecisionTree, TreeNode
from sectioner.forest.vote import VoteModel

FUSION_FORMAT = 1


def save_fusion_model(model, path: Path | str, feature_names: tuple[str, ...]) -> None:
    path = Path(path)
    doc: dict = {"format": FUSION_FORMAT, "feature_names": list(feature_names)}
    if isinstance(model, RandomForestModel):
        doc["kind"] = "rf"
        doc["rf"] = {
            "n_trees": model.n_trees,
            "max_features": model.max_features,
            "seed": model.seed,
            "n_features": model.n_features,
            "bootstrap": model.bootstrap,
            "trees": [t.root.to_dict() for t in model.trees],
            "oob": [[int(i) for i in oob] for oob in model.oob_indices],
        }
    elif isinstance(model, GbdtModel):
        doc["kind"] = "gbdt"
        doc["gbdt"] = {
            "base_logit": model.base_logit,
            "learning_rate": model.learning_rate,
            "n_rounds": model.n_rounds,
            "max_depth": model.max_depth,
            "lambda": model.lam,
            "seed": model.seed,
            "n_features": model.n_features,
            "trees": [t.root.to_dict() for t in model.trees],
            "train_loss_per_round": model.train_loss_per_round,
        }
    elif isinstance(model, VoteModel):
        doc["kind"] = "vote"
        doc["vote"] = {"mode": model.mode, "n_features": model.n_features}
    else:
        raise TypeError(f"cannot persist model of type {type(model).__name__}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_fusion_model(path: Path | str):
    path = Path(path)
    if not path.exists():
        raise IntegrityError(str(path), "fusion model file not found")
    doc = json.loads(path.read_text())
    if doc.get("format") != FUSION_FORMAT:
        raise IntegrityError(str(path), f"unsupported fusion format {doc.get('format')}")
    kind = doc.get("kind")
    if kind == "rf":
        d = doc["rf"]
        trees = [DecisionTree(TreeNode.from_dict(t), d["n_features"], "gini") for t in d["trees"]]
        return RandomForestModel(
            trees=trees,
            oob_indices=[np.asarray(o, dtype=np.int64) for o in d["oob"]],
            n_trees=d["n_trees"],
            max_features=d["max_features"],
            seed=d["seed"],
            n_features=d["n_features"],
            bootstrap=d["bootstrap"],
        )
    if kind == "gbdt":
        d = doc["gbdt"]
        trees = [DecisionTree(TreeNode.from_dict(t), d["n_features"], "newton") for t in d["trees"]]
        return GbdtModel(
            base_logit=d["base_logit"],
            trees=trees,
            learning_rate=d["learning_rate"],
            n_rounds=d["n_rounds"],
            max_depth=d["max_depth"],
            lam=d["lambda"],
            seed=d["seed"],
            n_features=d["n_features"],
            train_loss_per_round=list(d["train_loss_per_round"]),
        )
    if kind == "vote":
        d = doc["vote"]
        return VoteModel(mode=d["mode"], n_features=d["n_features"])
    raise IntegrityError(str(path), f"unknown fusion model kind {kind!r}")
