"""Accuracy/F1 evaluation and CSV report helpers."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sectioner.errors import EmptySplit


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total

    @property
    def no_positives(self) -> bool:
        return (2 * self.tp + self.fp + self.fn) == 0

    @property
    def f1(self) -> float:
        # No positives anywhere: report 0 with the no_positives flag
        # rather than NaN, so CSV columns stay totally ordered.
        denom = 2 * self.tp + self.fp + self.fn
        if denom == 0:
            return 0.0
        return 2 * self.tp / denom


def evaluate_predictions(y_true: np.ndarray, proba: np.ndarray, threshold: float = 0.5) -> ConfusionCounts:
    y_true = np.asarray(y_true, dtype=np.int64)
    if y_true.size == 0:
        raise EmptySplit("cannot evaluate an empty split")
    pred = (np.asarray(proba, dtype=np.float64) >= threshold).astype(np.int64)
    tp = int(((pred == 1) & (y_true == 1)).sum())
    fp = int(((pred == 1) & (y_true == 0)).sum())
    fn = int(((pred == 0) & (y_true == 1)).sum())
    tn = int(((pred == 0) & (y_true == 0)).sum())
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class MetricsRow:
    name: str
    split: str
    counts: ConfusionCounts

    def as_record(self) -> list[str]:
        c = self.counts
        return [
            self.name,
            self.split,
            str(c.tp),
            str(c.fp),
            str(c.fn),
            str(c.tn),
            repr(c.accuracy),
            repr(c.f1),
            "1" if c.no_positives else "0",
        ]


METRICS_HEADER = ["name", "split", "tp", "fp", "fn", "tn", "accuracy", "f1", "no_positives"]


def write_metrics_csv(rows: list[MetricsRow], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for row in rows:
            writer.writerow(row.as_record())


def read_metrics_csv(path: Path | str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


CNN_TABLE_HEADER = [
    "section",
    "n_train",
    "n_valid",
    "n_test",
    "train_accuracy",
    "valid_accuracy",
    "test_accuracy",
    "test_f1",
    "epochs_run",
    "best_val_loss",
]


def write_cnn_table(rows: list[dict], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CNN_TABLE_HEADER)
        for row in rows:
            writer.writerow([row[k] for k in CNN_TABLE_HEADER])
