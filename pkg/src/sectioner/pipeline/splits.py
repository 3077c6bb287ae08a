"""Three-way corpus splitting with label stratification.

Split sizes use largest-remainder rounding (ties to the earlier split);
class allocations are coupled to those totals so every split keeps class
balance within one file.  Rows pinned to a split in the manifest are
honored; fractions apply to the ``auto`` remainder.  cnn-train and
fusion-train additionally carry a 70/30 train/validation sub-split.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sectioner.errors import EmptySplit
from sectioner.pipeline.manifest import ManifestRow

SPLITS = ("cnn-train", "fusion-train", "test")
SUBSPLIT_FRACTIONS = (0.7, 0.3)


def largest_remainder(total: int, fractions: tuple[float, ...]) -> list[int]:
    quotas = [f * total for f in fractions]
    base = [math.floor(q) for q in quotas]
    leftover = total - sum(base)
    order = sorted(range(len(fractions)), key=lambda k: (-(quotas[k] - base[k]), k))
    for i in range(leftover):
        base[order[i]] += 1
    return base


def _stratified_allocation(class_sizes: list[int], totals: list[int]) -> list[list[int]]:
    """Per-class counts per bucket, matching ``totals`` exactly and staying
    within one file of each class's proportional share."""
    n = sum(class_sizes)
    k = len(totals)
    alloc = [[0] * k for _ in class_sizes]
    if n == 0:
        return alloc
    fracs: list[list[float]] = []
    for c, n_c in enumerate(class_sizes):
        ideals = [n_c * totals[j] / n for j in range(k)]
        alloc[c] = [math.floor(v) for v in ideals]
        fracs.append([ideals[j] - alloc[c][j] for j in range(k)])
    capacity = [totals[j] - sum(alloc[c][j] for c in range(len(class_sizes))) for j in range(k)]
    for c, n_c in enumerate(class_sizes):
        leftover = n_c - sum(alloc[c])
        for _ in range(leftover):
            candidates = [j for j in range(k) if capacity[j] > 0]
            j = max(candidates, key=lambda j: (fracs[c][j], -j))
            alloc[c][j] += 1
            capacity[j] -= 1
    return alloc


@dataclass(frozen=True)
class SplitPlan:
    split_of: dict[str, str]  # sha256 -> split
    subsplit_of: dict[str, str | None]  # sha256 -> train | val | None
    fractions: tuple[float, float, float]
    seed: int

    def shas(self, split: str, subsplit: str | None = None) -> list[str]:
        out = []
        for sha, s in self.split_of.items():
            if s != split:
                continue
            if subsplit is not None and self.subsplit_of.get(sha) != subsplit:
                continue
            out.append(sha)
        return out

    def rows(self, manifest: list[ManifestRow], split: str, subsplit: str | None = None) -> list[ManifestRow]:
        return [
            r
            for r in manifest
            if self.split_of.get(r.sha256) == split
            and (subsplit is None or self.subsplit_of.get(r.sha256) == subsplit)
        ]


def plan_splits(
    manifest: list[ManifestRow],
    fractions: tuple[float, float, float] = (0.5, 0.25, 0.25),
    seed: int = 0,
    *,
    allow_empty: bool = False,
) -> SplitPlan:
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    rng = np.random.default_rng(seed)

    split_of: dict[str, str] = {}
    for row in manifest:
        if row.split != "auto":
            split_of[row.sha256] = row.split

    auto = [r for r in manifest if r.split == "auto"]
    totals = largest_remainder(len(auto), tuple(fractions))
    by_class = [[r for r in auto if r.label == 0], [r for r in auto if r.label == 1]]
    alloc = _stratified_allocation([len(c) for c in by_class], totals)
    for c, rows_c in enumerate(by_class):
        order = rng.permutation(len(rows_c))
        shuffled = [rows_c[i] for i in order]
        start = 0
        for j, split in enumerate(SPLITS):
            for row in shuffled[start : start + alloc[c][j]]:
                split_of[row.sha256] = split
            start += alloc[c][j]

    if not allow_empty:
        for split in SPLITS:
            if not any(s == split for s in split_of.values()):
                raise EmptySplit(f"split {split!r} received no files")

    subsplit_of: dict[str, str | None] = {sha: None for sha in split_of}
    for split in ("cnn-train", "fusion-train"):
        members = [r for r in manifest if split_of.get(r.sha256) == split]
        sub_totals = largest_remainder(len(members), SUBSPLIT_FRACTIONS)
        classes = [[r for r in members if r.label == 0], [r for r in members if r.label == 1]]
        sub_alloc = _stratified_allocation([len(c) for c in classes], sub_totals)
        for c, rows_c in enumerate(classes):
            order = rng.permutation(len(rows_c))
            shuffled = [rows_c[i] for i in order]
            start = 0
            for j, name in enumerate(("train", "val")):
                for row in shuffled[start : start + sub_alloc[c][j]]:
                    subsplit_of[row.sha256] = name
                start += sub_alloc[c][j]
        if members and not allow_empty:
            for j, name in enumerate(("train", "val")):
                if sub_totals[j] == 0:
                    raise EmptySplit(f"{split} {name} sub-split received no files")

    return SplitPlan(split_of=split_of, subsplit_of=subsplit_of, fractions=tuple(fractions), seed=seed)


def write_plan(plan: SplitPlan, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sha256", "split", "subsplit"])
        for sha in sorted(plan.split_of):
            writer.writerow([sha, plan.split_of[sha], plan.subsplit_of.get(sha) or ""])


def read_plan(path: Path | str, fractions=(0.5, 0.25, 0.25), seed: int = 0) -> SplitPlan:
    split_of: dict[str, str] = {}
    subsplit_of: dict[str, str | None] = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            split_of[rec["sha256"]] = rec["split"]
            subsplit_of[rec["sha256"]] = rec["subsplit"] or None
    return SplitPlan(split_of=split_of, subsplit_of=subsplit_of, fractions=tuple(fractions), seed=seed)
