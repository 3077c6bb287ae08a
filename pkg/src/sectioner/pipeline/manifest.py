"""Corpus manifest: hashed, labelled, deduplicated file list.

CSV on disk with header ``sha256,path,label,split``; split is one of
cnn-train, fusion-train, test or auto (meaning: let the planner assign).
"""

from __future__ import annotations

import csv
import hashlib
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

from sectioner.errors import ConflictingLabel, UnreadableFileWarning

log = logging.getLogger(__name__)

SPLIT_VALUES = ("cnn-train", "fusion-train", "test", "auto")
MANIFEST_HEADER = ["sha256", "path", "label", "split"]


@dataclass(frozen=True)
class ManifestRow:
    sha256: str
    path: str
    label: int
    split: str = "auto"

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if self.split not in SPLIT_VALUES:
            raise ValueError(f"split must be one of {SPLIT_VALUES}, got {self.split!r}")


def _iter_labelled_files(root: Path, labels_csv: Path | None):
    if labels_csv is not None:
        with open(labels_csv, newline="") as fh:
            reader = csv.DictReader(fh)
            for rec in reader:
                path = Path(rec["path"])
                if not path.is_absolute():
                    path = root / path
                yield path, int(rec["label"])
        return
    for sub, label in (("benign", 0), ("malware", 1)):
        base = root / sub
        if not base.is_dir():
            continue
        for path in sorted(p for p in base.rglob("*") if p.is_file()):
            yield path, label


def build_manifest(root: Path | str, labels_csv: Path | str | None = None) -> tuple[list[ManifestRow], list[str]]:
    """Hash every labelled file under ``root``.

    Labels come from the ``benign/`` / ``malware/`` directory convention
    unless an explicit CSV (columns path,label) is given.  Duplicate
    contents keep the first path; the same sha256 under both labels is a
    hard error.  Returns (rows, warning messages).
    """
    root = Path(root)
    labels_csv = Path(labels_csv) if labels_csv else None
    rows: list[ManifestRow] = []
    seen: dict[str, ManifestRow] = {}
    notes: list[str] = []
    for path, label in _iter_labelled_files(root, labels_csv):
        try:
            blob = path.read_bytes()
        except OSError as exc:
            msg = f"skipped unreadable file {path}: {exc}"
            warnings.warn(msg, UnreadableFileWarning)
            notes.append(msg)
            continue
        digest = hashlib.sha256(blob).hexdigest()
        if digest in seen:
            if seen[digest].label != label:
                raise ConflictingLabel(digest)
            msg = f"duplicate sha256 {digest[:12]}… keeps {seen[digest].path}, drops {path}"
            notes.append(msg)
            log.warning(msg)
            continue
        row = ManifestRow(sha256=digest, path=str(path), label=label)
        seen[digest] = row
        rows.append(row)
    if not rows:
        msg = f"no labelled files found under {root}"
        notes.append(msg)
        log.warning(msg)
    return rows, notes


def write_manifest(rows: list[ManifestRow], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for row in rows:
            writer.writerow([row.sha256, row.path, row.label, row.split])


def read_manifest(path: Path | str) -> list[ManifestRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_HEADER:
            raise ValueError(f"manifest header must be {','.join(MANIFEST_HEADER)}")
        return [
            ManifestRow(sha256=rec["sha256"], path=rec["path"], label=int(rec["label"]), split=rec["split"])
            for rec in reader
        ]


def manifest_sha256(path: Path | str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
