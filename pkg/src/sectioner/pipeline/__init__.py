from sectioner.pipeline.manifest import ManifestRow, build_manifest, read_manifest, write_manifest
from sectioner.pipeline.splits import SplitPlan, plan_splits
from sectioner.pipeline.datasets import SectionDataset, build_section_datasets
from sectioner.pipeline.vectors import VectorSet, build_score_vectors
from sectioner.pipeline.evaluate import ConfusionCounts, evaluate_predictions
from sectioner.pipeline.run import RunConfig, run_end_to_end

__all__ = [
    "ManifestRow",
    "build_manifest",
    "read_manifest",
    "write_manifest",
    "SplitPlan",
    "plan_splits",
    "SectionDataset",
    "build_section_datasets",
    "VectorSet",
    "build_score_vectors",
    "ConfusionCounts",
    "evaluate_predictions",
    "RunConfig",
    "run_end_to_end",
]
