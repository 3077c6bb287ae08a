import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sectioner.catalog import SectionCatalog
from sectioner.cnn.bundle import SectionModelBundle, save_bundle
from sectioner.cnn.model import CnnArchitecture, SectionCnn
from sectioner.forest.persist import save_fusion_model
from sectioner.forest.random_forest import RandomForestModel
from sectioner.forest.tree import DecisionTree, TreeNode


@pytest.fixture(scope="session")
def catalog() -> SectionCatalog:
    return SectionCatalog()


def make_stub_run_dir(root: Path, catalog: SectionCatalog) -> Path:
    """A run directory with zero-weight bundles (every score = 0.5) and a
    hand-built single-tree forest that keys on the .idata slot: absent
    (-1) routes to a 0.9 leaf, present routes to a 0.2 leaf."""
    run_dir = root / "run"
    arch = CnnArchitecture()
    for name in catalog.names:
        model = SectionCnn.zeros(arch)
        bundle = SectionModelBundle(section_name=name, model=model, epochs_run=1, best_val_loss=0.0, seed=0)
        save_bundle(bundle, run_dir / "bundles" / name.lstrip("."))

    idata_slot = catalog.fusion.index(".idata")
    root_node = TreeNode(
        n_samples=10,
        impurity=0.5,
        value=0.5,
        feature=idata_slot,
        threshold=0.0,
        gain=0.5,
        left=TreeNode(n_samples=5, impurity=0.0, value=0.9),
        right=TreeNode(n_samples=5, impurity=0.0, value=0.2),
    )
    tree = DecisionTree(root=root_node, n_features=catalog.fusion_dim, criterion="gini")
    forest = RandomForestModel(
        trees=[tree],
        oob_indices=[np.array([], dtype=np.int64)],
        n_trees=1,
        max_features=catalog.fusion_dim,
        seed=0,
        n_features=catalog.fusion_dim,
        bootstrap=False,
    )
    save_fusion_model(forest, run_dir / "fusion" / "rf.json", catalog.fusion)
    return run_dir


@pytest.fixture()
def stub_run_dir(tmp_path: Path, catalog: SectionCatalog) -> Path:
    return make_stub_run_dir(tmp_path, catalog)
