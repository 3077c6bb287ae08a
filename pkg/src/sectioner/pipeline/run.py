"""End-to-end orchestration: plan -> cnn -> vectors -> fusion -> report.

Every stage writes its outputs under the run directory and records a hash
of the configuration slice it depends on (chained to its upstream stage)
in run.json.  Re-running with an unchanged configuration skips every
stage; changing, say, a CNN parameter invalidates that stage and all
downstream ones.  Nothing written here embeds a timestamp, so equal-seed
runs produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sectioner import __version__
from sectioner.catalog import CANONICAL_SECTIONS, DEFAULT_FUSION_SECTIONS, SectionCatalog
from sectioner.cnn.bundle import SectionModelBundle, load_bundle, save_bundle
from sectioner.cnn.train import TrainConfig, score_images, train_section_cnn
from sectioner.errors import EmptySplit, StageError
from sectioner.forest.gbdt import fit_gbdt
from sectioner.forest.importance import ImportanceReport, mdi_importance, permutation_importance
from sectioner.forest.persist import load_fusion_model, save_fusion_model
from sectioner.forest.random_forest import fit_random_forest
from sectioner.forest.vote import VoteModel
from sectioner.pipeline.datasets import build_section_datasets
from sectioner.pipeline.evaluate import (
    CNN_TABLE_HEADER,
    MetricsRow,
    evaluate_predictions,
    write_cnn_table,
    write_metrics_csv,
)
from sectioner.pipeline.manifest import ManifestRow, manifest_sha256, read_manifest
from sectioner.pipeline.splits import SplitPlan, plan_splits, read_plan, write_plan
from sectioner.pipeline.vectors import VectorSet, build_score_vectors, read_score_vectors, write_score_vectors

log = logging.getLogger(__name__)

FUSION_MODELS = ("rf", "gbdt", "vote-geq3", "vote-gt3")
RUN_FORMAT = 1


@dataclass(frozen=True)
class RunConfig:
    manifest_path: str
    run_dir: str
    seed: int = 0
    fractions: tuple[float, float, float] = (0.5, 0.25, 0.25)
    allow_empty: bool = False
    sections: tuple[str, ...] = CANONICAL_SECTIONS
    fusion_sections: tuple[str, ...] = DEFAULT_FUSION_SECTIONS
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 5
    learning_rate: float = 1e-3
    models: tuple[str, ...] = FUSION_MODELS
    rf_trees: int = 100
    gbdt_rounds: int = 100
    gbdt_depth: int = 3
    gbdt_learning_rate: float = 0.1
    gbdt_lambda: float = 1.0
    perm_repeats: int = 10
    threads: int = 1

    def catalog(self) -> SectionCatalog:
        return SectionCatalog(names=self.sections, fusion=self.fusion_sections)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            learning_rate=self.learning_rate,
            rng_seed=seed,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["fractions"] = list(self.fractions)
        d["sections"] = list(self.sections)
        d["fusion_sections"] = list(self.fusion_sections)
        d["models"] = list(self.models)
        return d


def derive_seed(master: int, tag: str) -> int:
    """Stable stream separation: independent integer seed per stage tag."""
    digest = hashlib.sha256(f"{master}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little") % (2**31)


def _hash_of(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


class RunDirectory:
    """Paths and run.json bookkeeping for one run directory."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.run_json = self.root / "run.json"
        self.plan_csv = self.root / "split_plan.csv"
        self.bundles = self.root / "bundles"
        self.fusion = self.root / "fusion"
        self.reports = self.root / "reports"

    def bundle_dir(self, section: str) -> Path:
        return self.bundles / section.lstrip(".")

    def fusion_path(self, model: str) -> Path:
        return self.fusion / f"{model}.json"

    def importance_path(self, model: str, method: str) -> Path:
        return self.reports / f"importance_{model}_{method.replace('-', '_')}.csv"

    def state(self) -> dict:
        if self.run_json.exists():
            return json.loads(self.run_json.read_text())
        return {"format": RUN_FORMAT, "version": __version__, "stages": {}}

    def save_state(self, state: dict) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self.run_json.write_text(json.dumps(state, indent=2, sort_keys=True) + "\n")


def write_importance_csv(report: ImportanceReport, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "feature_name", "score", "rank"])
        for row in report.to_csv_rows():
            writer.writerow(row)


class Pipeline:
    """Stage runner bound to one config + run directory."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.dirs = RunDirectory(config.run_dir)
        self.catalog = config.catalog()
        self.manifest: list[ManifestRow] = read_manifest(config.manifest_path)
        self._manifest_digest = manifest_sha256(config.manifest_path)

    # -- stage hashing ----------------------------------------------------

    def stage_hashes(self) -> dict[str, str]:
        c = self.config
        plan_h = _hash_of(
            {
                "manifest": self._manifest_digest,
                "seed": c.seed,
                "fractions": list(c.fractions),
                "allow_empty": c.allow_empty,
            }
        )
        cnn_h = _hash_of(
            {
                "plan": plan_h,
                "sections": list(c.sections),
                "batch_size": c.batch_size,
                "max_epochs": c.max_epochs,
                "patience": c.patience,
                "learning_rate": c.learning_rate,
            }
        )
        vectors_h = _hash_of({"cnn": cnn_h, "fusion_sections": list(c.fusion_sections)})
        fusion_h = _hash_of(
            {
                "vectors": vectors_h,
                "models": list(c.models),
                "rf_trees": c.rf_trees,
                "gbdt": [c.gbdt_rounds, c.gbdt_depth, c.gbdt_learning_rate, c.gbdt_lambda],
            }
        )
        report_h = _hash_of({"fusion": fusion_h, "perm_repeats": c.perm_repeats})
        return {"plan": plan_h, "cnn": cnn_h, "vectors": vectors_h, "fusion": fusion_h, "report": report_h}

    def _fresh(self, stage: str, outputs: list[Path]) -> bool:
        state = self.dirs.state()
        recorded = state["stages"].get(stage, {}).get("hash")
        return recorded == self.stage_hashes()[stage] and all(p.exists() for p in outputs)

    def _mark(self, stage: str) -> None:
        state = self.dirs.state()
        state["format"] = RUN_FORMAT
        state["version"] = __version__
        state["config"] = self.config.to_dict()
        state.setdefault("stages", {})[stage] = {"hash": self.stage_hashes()[stage]}
        self.dirs.save_state(state)

    # -- stages ------------------------------------------------------------

    def stage_plan(self) -> SplitPlan:
        if self._fresh("plan", [self.dirs.plan_csv]):
            log.info("plan stage up to date; skipping")
            return read_plan(self.dirs.plan_csv, self.config.fractions, self.config.seed)
        plan = plan_splits(
            self.manifest,
            self.config.fractions,
            self.config.seed,
            allow_empty=self.config.allow_empty,
        )
        write_plan(plan, self.dirs.plan_csv)
        self._mark("plan")
        return plan

    def _load_bundles(self, sections) -> dict[str, SectionModelBundle]:
        bundles = {}
        for name in sections:
            directory = self.dirs.bundle_dir(name)
            if (directory / "arch.json").exists():
                bundles[name] = load_bundle(directory)
        return bundles

    def stage_cnn(self, plan: SplitPlan) -> None:
        outputs = [self.dirs.reports / "cnn_metrics.csv"]
        if self._fresh("cnn", outputs):
            log.info("cnn stage up to date; skipping")
            return

        train_rows = plan.rows(self.manifest, "cnn-train", "train")
        val_rows = plan.rows(self.manifest, "cnn-train", "val")
        test_rows = plan.rows(self.manifest, "test")
        if not train_rows or not val_rows:
            raise EmptySplit("cnn-train sub-splits must be non-empty")
        train_ds, _ = build_section_datasets(train_rows, self.catalog, threads=self.config.threads)
        val_ds, _ = build_section_datasets(val_rows, self.catalog, threads=self.config.threads)
        test_ds, _ = build_section_datasets(test_rows, self.catalog, threads=self.config.threads)

        from sectioner.cnn.train import images_to_batch

        table_rows: list[dict] = []
        for name in self.catalog.names:
            tr, va, te = train_ds[name], val_ds[name], test_ds[name]
            record = {k: "" for k in CNN_TABLE_HEADER}
            record.update({"section": name, "n_train": tr.count, "n_valid": va.count, "n_test": te.count})
            if tr.count == 0 or va.count == 0:
                log.warning("section %s has no train/validation data; skipping CNN", name)
                table_rows.append(record)
                continue
            seed = derive_seed(self.config.seed, f"cnn:{name}")
            bundle = train_section_cnn(
                images_to_batch(tr.images),
                tr.labels,
                images_to_batch(va.images),
                va.labels,
                self.config.train_config(seed),
                section_name=name,
            )
            save_bundle(bundle, self.dirs.bundle_dir(name))
            train_counts = evaluate_predictions(tr.labels, score_images(bundle, tr.images))
            val_counts = evaluate_predictions(va.labels, score_images(bundle, va.images))
            record.update(
                {
                    "train_accuracy": repr(train_counts.accuracy),
                    "valid_accuracy": repr(val_counts.accuracy),
                    "epochs_run": bundle.epochs_run,
                    "best_val_loss": repr(bundle.best_val_loss),
                }
            )
            if te.count:
                test_counts = evaluate_predictions(te.labels, score_images(bundle, te.images))
                record.update({"test_accuracy": repr(test_counts.accuracy), "test_f1": repr(test_counts.f1)})
            table_rows.append(record)

        write_cnn_table(table_rows, self.dirs.reports / "cnn_metrics.csv")
        self._mark("cnn")

    def stage_vectors(self, plan: SplitPlan) -> tuple[VectorSet, VectorSet]:
        train_csv = self.dirs.reports / "score_vectors.csv"
        test_csv = self.dirs.reports / "score_vectors_test.csv"
        if self._fresh("vectors", [train_csv, test_csv]):
            log.info("vectors stage up to date; skipping")
            return read_score_vectors(train_csv), read_score_vectors(test_csv)

        bundles = self._load_bundles(self.catalog.fusion)
        fusion_rows = plan.rows(self.manifest, "fusion-train")
        test_rows = plan.rows(self.manifest, "test")
        vs_train = build_score_vectors(bundles, fusion_rows, self.catalog)
        vs_test = build_score_vectors(bundles, test_rows, self.catalog)
        write_score_vectors(vs_train, train_csv)
        write_score_vectors(vs_test, test_csv)
        self._mark("vectors")
        return vs_train, vs_test

    def _fusion_training_rows(self, plan: SplitPlan, vs_train: VectorSet):
        sub = {sha: plan.subsplit_of.get(sha) for sha in vs_train.shas}
        train_idx = [i for i, sha in enumerate(vs_train.shas) if sub[sha] == "train"]
        val_idx = [i for i, sha in enumerate(vs_train.shas) if sub[sha] == "val"]
        return np.array(train_idx, dtype=np.int64), np.array(val_idx, dtype=np.int64)

    def stage_fusion(self, plan: SplitPlan, vs_train: VectorSet) -> dict[str, object]:
        outputs = [self.dirs.fusion_path(m) for m in self.config.models]
        if self._fresh("fusion", outputs):
            log.info("fusion stage up to date; skipping")
            return {m: load_fusion_model(self.dirs.fusion_path(m)) for m in self.config.models}

        train_idx, _ = self._fusion_training_rows(plan, vs_train)
        if train_idx.size == 0:
            raise EmptySplit("fusion-train train sub-split is empty")
        X, y = vs_train.X[train_idx], vs_train.y[train_idx]
        models: dict[str, object] = {}
        for name in self.config.models:
            if name == "rf":
                models[name] = fit_random_forest(
                    X, y, n_trees=self.config.rf_trees, seed=derive_seed(self.config.seed, "rf")
                )
            elif name == "gbdt":
                models[name] = fit_gbdt(
                    X,
                    y,
                    n_rounds=self.config.gbdt_rounds,
                    max_depth=self.config.gbdt_depth,
                    learning_rate=self.config.gbdt_learning_rate,
                    lam=self.config.gbdt_lambda,
                    seed=derive_seed(self.config.seed, "gbdt"),
                )
            elif name in ("vote-geq3", "vote-gt3"):
                models[name] = VoteModel(mode=name.split("-")[1], n_features=self.catalog.fusion_dim)
            else:
                raise ValueError(f"unknown fusion model {name!r}")
            save_fusion_model(models[name], self.dirs.fusion_path(name), self.catalog.fusion)
        self._mark("fusion")
        return models

    def stage_report(self, plan: SplitPlan, vs_train: VectorSet, vs_test: VectorSet, models: dict) -> Path:
        metrics_csv = self.dirs.reports / "fusion_metrics.csv"
        importance_files = [self.dirs.importance_path(m, meth) for m, meth in self._importance_jobs(models)]
        if self._fresh("report", [metrics_csv, *importance_files]):
            log.info("report stage up to date; skipping")
            return metrics_csv

        train_idx, val_idx = self._fusion_training_rows(plan, vs_train)
        rows: list[MetricsRow] = []
        for name in self.config.models:
            model = models[name]
            for split, X, y in (
                ("train", vs_train.X[train_idx], vs_train.y[train_idx]),
                ("valid", vs_train.X[val_idx], vs_train.y[val_idx]),
                ("test", vs_test.X, vs_test.y),
            ):
                if X.shape[0] == 0:
                    continue
                rows.append(MetricsRow(name=name, split=split, counts=evaluate_predictions(y, model.predict_proba(X))))
        write_metrics_csv(rows, metrics_csv)

        names = self.catalog.fusion
        for model_name, method in self._importance_jobs(models):
            model = models[model_name]
            if method == "mdi":
                report = mdi_importance(model, feature_names=names)
            elif method == "perm-oob":
                report = permutation_importance(
                    model,
                    vs_train.X[train_idx],
                    vs_train.y[train_idx],
                    repeats=self.config.perm_repeats,
                    mode="oob",
                    seed=derive_seed(self.config.seed, f"perm-oob:{model_name}"),
                    feature_names=names,
                )
            else:
                report = permutation_importance(
                    model,
                    vs_test.X,
                    vs_test.y,
                    repeats=self.config.perm_repeats,
                    mode="holdout",
                    seed=derive_seed(self.config.seed, f"perm-holdout:{model_name}"),
                    feature_names=names,
                )
            write_importance_csv(report, self.dirs.importance_path(model_name, method))
        self._mark("report")
        return metrics_csv

    def _importance_jobs(self, models: dict) -> list[tuple[str, str]]:
        jobs = []
        for name in self.config.models:
            if name == "rf":
                jobs += [("rf", "mdi"), ("rf", "perm-oob"), ("rf", "perm-holdout")]
            elif name == "gbdt":
                jobs += [("gbdt", "mdi"), ("gbdt", "perm-holdout")]
        return jobs


def run_end_to_end(config: RunConfig) -> Path:
    """Run every stage, resuming where outputs are already current.

    Returns the path of the fusion metrics report.  Stage failures are
    re-raised as :class:`StageError` tagged with the stage name.
    """
    pipe = Pipeline(config)
    stage = "plan"
    try:
        plan = pipe.stage_plan()
        stage = "cnn"
        pipe.stage_cnn(plan)
        stage = "vectors"
        vs_train, vs_test = pipe.stage_vectors(plan)
        stage = "fusion"
        models = pipe.stage_fusion(plan, vs_train)
        stage = "report"
        return pipe.stage_report(plan, vs_train, vs_test, models)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc
