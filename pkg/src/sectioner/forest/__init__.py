from sectioner.forest.tree import DecisionTree, TreeNode, TreeParams, fit_tree
from sectioner.forest.random_forest import RandomForestModel, fit_random_forest
from sectioner.forest.gbdt import GbdtModel, fit_gbdt
from sectioner.forest.vote import VoteModel, VoteResult, majority_vote
from sectioner.forest.importance import ImportanceReport, mdi_importance, permutation_importance
from sectioner.forest.predict import predict
from sectioner.forest.persist import save_fusion_model, load_fusion_model

__all__ = [
    "DecisionTree",
    "TreeNode",
    "TreeParams",
    "fit_tree",
    "RandomForestModel",
    "fit_random_forest",
    "GbdtModel",
    "fit_gbdt",
    "VoteModel",
    "VoteResult",
    "majority_vote",
    "ImportanceReport",
    "mdi_importance",
    "permutation_importance",
    "predict",
    "save_fusion_model",
    "load_fusion_model",
]
