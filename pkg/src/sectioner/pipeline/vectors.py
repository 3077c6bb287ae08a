"""Score-vector construction: one fixed-order vector per file.

Slot order is the catalog's canonical order restricted to the fusion
subset.  Absent or empty sections score -1; present sections get their
CNN's probability.  Scoring is batched per section for speed, with
results scattered back in manifest order.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sectioner.catalog import SectionCatalog
from sectioner.cnn.bundle import SectionModelBundle
from sectioner.cnn.train import score_images
from sectioner.errors import MissingBundle, SectionerError
from sectioner.imaging import image_section
from sectioner.pe import extract_tracked_sections, parse_pe
from sectioner.pipeline.manifest import ManifestRow

log = logging.getLogger(__name__)

ABSENT_SCORE = -1.0


@dataclass
class VectorSet:
    shas: list[str]
    X: np.ndarray  # (N, fusion_dim) float64
    y: np.ndarray  # (N,) int64
    feature_names: tuple[str, ...]
    all_absent: list[str]  # shas with no tracked fusion section at all
    skipped: list[tuple[str, str]]  # (sha, reason) for unparseable files


def build_score_vectors(
    bundles: dict[str, SectionModelBundle],
    rows: list[ManifestRow],
    catalog: SectionCatalog | None = None,
) -> VectorSet:
    """Score every file in ``rows`` against the per-section bundles."""
    catalog = catalog or SectionCatalog()
    for name in catalog.fusion:
        if name not in bundles:
            raise MissingBundle(name)

    kept_rows: list[ManifestRow] = []
    skipped: list[tuple[str, str]] = []
    images_by_slot: dict[str, list[tuple[int, np.ndarray]]] = {name: [] for name in catalog.fusion}
    for row in rows:
        try:
            pe = parse_pe(Path(row.path).read_bytes())
        except (OSError, SectionerError) as exc:
            skipped.append((row.sha256, str(exc)))
            log.warning("skipping %s: %s", row.path, exc)
            continue
        sections = extract_tracked_sections(pe, catalog)
        idx = len(kept_rows)
        kept_rows.append(row)
        for name in catalog.fusion:
            if name in sections:
                images_by_slot[name].append((idx, image_section(sections[name]).pixels))

    n = len(kept_rows)
    X = np.full((n, catalog.fusion_dim), ABSENT_SCORE, dtype=np.float64)
    for j, name in enumerate(catalog.fusion):
        entries = images_by_slot[name]
        if not entries:
            continue
        batch = np.stack([pix for _, pix in entries])
        scores = score_images(bundles[name], batch)
        for (idx, _), score in zip(entries, scores):
            X[idx, j] = float(score)

    all_absent = [kept_rows[i].sha256 for i in range(n) if np.all(X[i] == ABSENT_SCORE)]
    for sha in all_absent:
        log.warning("no tracked fusion sections in %s; all-absent vector", sha)
    return VectorSet(
        shas=[r.sha256 for r in kept_rows],
        X=X,
        y=np.array([r.label for r in kept_rows], dtype=np.int64),
        feature_names=catalog.fusion,
        all_absent=all_absent,
        skipped=skipped,
    )


def write_score_vectors(vs: VectorSet, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sha256", "label", *vs.feature_names])
        for i, sha in enumerate(vs.shas):
            writer.writerow([sha, int(vs.y[i]), *[repr(float(v)) for v in vs.X[i]]])


def read_score_vectors(path: Path | str) -> VectorSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        feature_names = tuple(header[2:])
        shas, ys, xs = [], [], []
        for rec in reader:
            shas.append(rec[0])
            ys.append(int(rec[1]))
            xs.append([float(v) for v in rec[2:]])
    X = np.array(xs, dtype=np.float64) if xs else np.zeros((0, len(feature_names)))
    y = np.array(ys, dtype=np.int64)
    all_absent = [shas[i] for i in range(len(shas)) if xs and np.all(X[i] == ABSENT_SCORE)]
    return VectorSet(shas=shas, X=X, y=y, feature_names=feature_names, all_absent=all_absent, skipped=[])
