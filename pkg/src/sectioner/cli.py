"""Command-line surface: extract, train, score, explain.

Exit codes are a stable contract: 0 success, 1 usage, 2 malformed input,
3 stage failure, 4 missing artifact, 5 unsupported combination.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from sectioner import __version__
from sectioner.catalog import SectionCatalog
from sectioner.cnn.bundle import load_bundle
from sectioner.cnn.train import score_section
from sectioner.errors import (
    IntegrityError,
    MalformedHeader,
    MissingBundle,
    OobUnavailable,
    SectionerError,
    StageError,
    TooManySections,
)
from sectioner.forest.importance import mdi_importance, permutation_importance
from sectioner.forest.persist import load_fusion_model
from sectioner.imaging import image_dump_name, image_section, write_pgm, write_raw
from sectioner.pe import extract_tracked_sections, parse_pe
from sectioner.pipeline.run import FUSION_MODELS, Pipeline, RunConfig, write_importance_csv
from sectioner.pipeline.vectors import read_score_vectors

log = logging.getLogger("sectioner")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MALFORMED = 2
EXIT_STAGE = 3
EXIT_MISSING_ARTIFACT = 4
EXIT_UNSUPPORTED = 5

SCORE_REPORT_FORMAT = 1


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors, per the exit-code contract."""

    def error(self, message):
        raise UsageError(message)


def _build_parser() -> Parser:
    parser = Parser(prog="sectioner", description="Per-section PE imaging, CNN scoring and fusion.")
    parser.add_argument("--version", action="version", version=f"sectioner {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_dir_default = os.environ.get("SECTIONER_RUN_DIR")

    p_extract = sub.add_parser("extract", help="dump per-section grayscale images")
    p_extract.add_argument("--input", required=True, help="PE file to image")
    p_extract.add_argument("--out-dir", required=True, help="directory for image files")
    p_extract.add_argument("--raw", action="store_true", help="write raw 4096-byte dumps instead of PGM")

    p_train = sub.add_parser("train", help="run training stages against a manifest")
    p_train.add_argument("--stage", required=True, choices=["cnn", "fusion"])
    p_train.add_argument("--model", choices=list(FUSION_MODELS), default=None,
                         help="fusion stage only: train this model (default: all)")
    p_train.add_argument("--manifest", required=True)
    p_train.add_argument("--run-dir", default=run_dir_default, required=run_dir_default is None)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--fractions", default="0.5,0.25,0.25",
                         help="cnn-train,fusion-train,test fractions for auto rows")
    p_train.add_argument("--allow-empty", action="store_true")
    p_train.add_argument("--epochs", type=int, default=100)
    p_train.add_argument("--patience", type=int, default=5)
    p_train.add_argument("--batch-size", type=int, default=64)
    p_train.add_argument("--rf-trees", type=int, default=100)
    p_train.add_argument("--gbdt-rounds", type=int, default=100)
    p_train.add_argument("--perm-repeats", type=int, default=10)
    p_train.add_argument("--threads", type=int, default=1)

    p_score = sub.add_parser("score", help="score one PE file against a trained run")
    p_score.add_argument("--input", required=True)
    p_score.add_argument("--run-dir", default=run_dir_default, required=run_dir_default is None)
    p_score.add_argument("--model", choices=list(FUSION_MODELS), default="rf")
    p_score.add_argument("--format", choices=["json", "text"], default="text")
    p_score.add_argument("--top-k", type=int, default=6)

    p_explain = sub.add_parser("explain", help="feature-importance report for a trained fusion model")
    p_explain.add_argument("--method", required=True, choices=["mdi", "perm-oob", "perm-holdout"])
    p_explain.add_argument("--model", required=True, choices=["rf", "gbdt"])
    p_explain.add_argument("--run-dir", default=run_dir_default, required=run_dir_default is None)
    p_explain.add_argument("--split", choices=["train", "test"], default="test",
                           help="which score vectors feed permutation importance")
    p_explain.add_argument("--repeats", type=int, default=10)
    p_explain.add_argument("--seed", type=int, default=0)
    p_explain.add_argument("--format", choices=["csv", "text"], default="text")
    p_explain.add_argument("--out", default=None, help="also write the CSV here")
    return parser


def _catalog_for_run(run_dir: Path) -> SectionCatalog:
    run_json = run_dir / "run.json"
    if run_json.exists():
        cfg = json.loads(run_json.read_text()).get("config", {})
        if "sections" in cfg and "fusion_sections" in cfg:
            return SectionCatalog(names=tuple(cfg["sections"]), fusion=tuple(cfg["fusion_sections"]))
    return SectionCatalog()


# -- extract ----------------------------------------------------------------


def cmd_extract(args) -> int:
    data = Path(args.input).read_bytes()
    pe = parse_pe(data)
    catalog = SectionCatalog()
    sections = extract_tracked_sections(pe, catalog)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256(data).hexdigest()

    print(f"{'section':<8} {'size':>8}  present  file")
    written = 0
    for name in catalog.names:
        if name in sections:
            image = image_section(sections[name])
            fname = image_dump_name(digest, name, raw=args.raw)
            if args.raw:
                write_raw(image, out_dir / fname)
            else:
                write_pgm(image, out_dir / fname)
            written += 1
            print(f"{name:<8} {sections[name].raw_size:>8}  yes      {fname}")
        else:
            print(f"{name:<8} {'-':>8}  no       -")
    print(f"{written} present / {len(catalog.names) - written} absent")
    if written == 0:
        log.warning("no tracked sections present in %s", args.input)
    return EXIT_OK


# -- train -------------------------------------------------------------------


def _run_config(args, models) -> RunConfig:
    fractions = tuple(float(v) for v in args.fractions.split(","))
    if len(fractions) != 3:
        raise UsageError("--fractions needs three comma-separated values")
    return RunConfig(
        manifest_path=args.manifest,
        run_dir=args.run_dir,
        seed=args.seed,
        fractions=fractions,  # type: ignore[arg-type]
        allow_empty=args.allow_empty,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        patience=args.patience,
        models=models,
        rf_trees=args.rf_trees,
        gbdt_rounds=args.gbdt_rounds,
        perm_repeats=args.perm_repeats,
        threads=args.threads,
    )


def _print_csv_table(path: Path, title: str) -> None:
    import csv

    print(title)
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            print("  " + "  ".join(f"{cell:<12}" for cell in cell_trim(rec)))


def cell_trim(cells: list[str]) -> list[str]:
    out = []
    for cell in cells:
        try:
            out.append(f"{float(cell):.4f}" if "." in cell else cell)
        except ValueError:
            out.append(cell)
    return out


def cmd_train(args) -> int:
    if not Path(args.manifest).exists():
        raise UsageError(f"manifest not found: {args.manifest}")
    models = (args.model,) if args.model else FUSION_MODELS
    config = _run_config(args, models)
    pipe = Pipeline(config)
    log.info("resolved config: %s", json.dumps(config.to_dict(), sort_keys=True))
    stage = "plan"
    try:
        plan = pipe.stage_plan()
        if args.stage == "cnn":
            stage = "cnn"
            pipe.stage_cnn(plan)
        else:
            stage = "vectors"
            vs_train, vs_test = pipe.stage_vectors(plan)
            stage = "fusion"
            fitted = pipe.stage_fusion(plan, vs_train)
            stage = "report"
            pipe.stage_report(plan, vs_train, vs_test, fitted)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc
    if args.stage == "cnn":
        _print_csv_table(pipe.dirs.reports / "cnn_metrics.csv", "per-section CNN metrics")
    else:
        _print_csv_table(pipe.dirs.reports / "fusion_metrics.csv", "fusion metrics")
    return EXIT_OK


# -- score ---------------------------------------------------------------


def _load_run_models(run_dir: Path, model_name: str, catalog: SectionCatalog):
    bundles = {}
    for name in catalog.fusion:
        bundles[name] = load_bundle(run_dir / "bundles" / name.lstrip("."))
    fusion_path = run_dir / "fusion" / f"{model_name}.json"
    if not fusion_path.exists():
        raise MissingBundle(model_name, f"no fusion model at {fusion_path}")
    return bundles, load_fusion_model(fusion_path)


def _score_report(args) -> dict:
    run_dir = Path(args.run_dir)
    catalog = _catalog_for_run(run_dir)
    bundles, fusion_model = _load_run_models(run_dir, args.model, catalog)

    report: dict = {
        "format": SCORE_REPORT_FORMAT,
        "input": {"path": args.input, "sha256": ""},
        "model": args.model,
        "threshold": 0.5,
        "warnings": [],
    }
    data = Path(args.input).read_bytes()
    report["input"]["sha256"] = hashlib.sha256(data).hexdigest()
    try:
        pe = parse_pe(data)
    except (MalformedHeader, TooManySections) as exc:
        # An AV pipeline must answer something: malformed files abstain to
        # benign, but the failure is surfaced in the report and exit code.
        report.update(
            {
                "probability": None,
                "label": "benign",
                "abstained": True,
                "all_absent": False,
                "sections": [],
                "top_sections": [],
                "importance": None,
            }
        )
        report["warnings"].append(f"unparseable input: {exc}")
        report["_exit"] = EXIT_MALFORMED
        return report

    sections = extract_tracked_sections(pe, catalog)
    vector = np.full(catalog.fusion_dim, -1.0)
    section_rows = []
    for j, name in enumerate(catalog.fusion):
        if name in sections:
            vector[j] = score_section(bundles[name], image_section(sections[name]))
            section_rows.append({"name": name, "present": True, "score": float(vector[j])})
        else:
            section_rows.append({"name": name, "present": False, "score": None})

    proba = float(fusion_model.predict_proba(vector[None, :])[0])
    all_absent = bool(np.all(vector == -1.0))
    if all_absent:
        report["warnings"].append("no tracked fusion sections present")

    present_sorted = sorted(
        (r for r in section_rows if r["present"]),
        key=lambda r: (-r["score"], catalog.fusion.index(r["name"])),
    )
    importance = None
    if args.model in ("rf", "gbdt"):
        mdi = mdi_importance(fusion_model, feature_names=catalog.fusion)
        importance = {
            "method": "mdi",
            "ranking": [
                {"feature": catalog.fusion[idx], "score": float(mdi.scores[idx]), "rank": rank}
                for rank, idx in enumerate(mdi.ranking(), start=1)
            ],
        }

    report.update(
        {
            "probability": proba,
            "label": "malware" if proba >= 0.5 else "benign",
            "abstained": False,
            "all_absent": all_absent,
            "sections": section_rows,
            "top_sections": [{"name": r["name"], "score": r["score"]} for r in present_sorted[: args.top_k]],
            "importance": importance,
            "_exit": EXIT_OK,
        }
    )
    return report


def _print_score_text(report: dict) -> None:
    print(f"file:   {report['input']['path']}")
    print(f"sha256: {report['input']['sha256']}")
    print(f"model:  {report['model']}")
    if report["abstained"]:
        print("verdict: benign (abstained)")
        for w in report["warnings"]:
            print(f"warning: {w}")
        return
    print(f"verdict: {report['label']} (p={report['probability']:.6f})")
    print("sections:")
    for row in report["sections"]:
        score = "absent" if not row["present"] else f"{row['score']:.6f}"
        print(f"  {row['name']:<8} {score}")
    if report["top_sections"]:
        ranked = ", ".join(f"{r['name']}={r['score']:.4f}" for r in report["top_sections"])
        print(f"top sections: {ranked}")
    if report["importance"]:
        ranked = ", ".join(f"{r['feature']}(#{r['rank']})" for r in report["importance"]["ranking"])
        print(f"importance ({report['importance']['method']}): {ranked}")
    for w in report["warnings"]:
        print(f"warning: {w}")


def cmd_score(args) -> int:
    report = _score_report(args)
    exit_code = report.pop("_exit")
    if args.format == "json":
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        _print_score_text(report)
    return exit_code


# -- explain --------------------------------------------------------------


def cmd_explain(args) -> int:
    if args.model == "gbdt" and args.method == "perm-oob":
        raise OobUnavailable("out-of-bag permutation importance is undefined for gbdt (no bootstrap)")
    run_dir = Path(args.run_dir)
    catalog = _catalog_for_run(run_dir)
    fusion_path = run_dir / "fusion" / f"{args.model}.json"
    if not fusion_path.exists():
        raise MissingBundle(args.model, f"no fusion model at {fusion_path}")
    model = load_fusion_model(fusion_path)

    if args.method == "mdi":
        report = mdi_importance(model, feature_names=catalog.fusion)
    else:
        vectors_csv = run_dir / "reports" / ("score_vectors.csv" if args.split == "train" else "score_vectors_test.csv")
        if not vectors_csv.exists():
            raise MissingBundle("score-vectors", f"no score vectors at {vectors_csv}")
        vs = read_score_vectors(vectors_csv)
        mode = "oob" if args.method == "perm-oob" else "holdout"
        report = permutation_importance(
            model, vs.X, vs.y, repeats=args.repeats, mode=mode, seed=args.seed, feature_names=catalog.fusion
        )

    if args.out:
        write_importance_csv(report, args.out)
    if args.format == "csv":
        print("method,feature_name,score,rank")
        for row in report.to_csv_rows():
            print(",".join(row))
    else:
        print(f"importance method: {report.method}")
        for method, name, score, rank in report.to_csv_rows():
            print(f"  #{rank} {name:<8} {float(score):+.6f}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    log.info("resolved config: %s", json.dumps(vars(args), sort_keys=True, default=str))

    handlers = {"extract": cmd_extract, "train": cmd_train, "score": cmd_score, "explain": cmd_explain}
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MalformedHeader, TooManySections) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except OobUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (MissingBundle, IntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except StageError as exc:
        print(f"error in stage '{exc.stage}': {exc.cause}", file=sys.stderr)
        return EXIT_STAGE
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SectionerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
