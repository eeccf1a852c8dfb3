"""Expected and maximum calibration error over equal-width confidence bins."""

from __future__ import annotations

import csv
import math
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import PredictionMatrix
from .ranks import labels_to_columns

DEFAULT_BINS = 15


@dataclass(frozen=True, eq=False)
class CalibrationTable:
    n_bins: int
    counts: np.ndarray
    accuracy: np.ndarray  # NaN for empty bins
    confidence: np.ndarray  # NaN for empty bins
    ece: float
    mce: float

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def rows(self) -> list[tuple[int, int, float | None, float | None]]:
        out = []
        for m in range(self.n_bins):
            if self.counts[m]:
                out.append((m + 1, int(self.counts[m]), float(self.accuracy[m]), float(self.confidence[m])))
            else:
                out.append((m + 1, 0, None, None))
        return out

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bin", "count", "accuracy", "confidence"])
            for b, count, acc, conf in self.rows():
                writer.writerow([b, count, "" if acc is None else repr(acc), "" if conf is None else repr(conf)])


def bin_index(confidence: np.ndarray, n_bins: int) -> np.ndarray:
    """0-based bin of each confidence; bin m covers ((m-1)/M, m/M], 0 goes to the first."""
    edges = np.arange(1, n_bins + 1) / n_bins
    idx = np.searchsorted(edges, confidence, side="left")
    return np.clip(idx, 0, n_bins - 1)


def table_from_confidences(confidence, correct, n_bins: int = DEFAULT_BINS) -> CalibrationTable:
    confidence = np.asarray(confidence, dtype=np.float64)
    correct = np.asarray(correct, dtype=np.float64)
    if n_bins < 1:
        raise ValueError("need at least one bin")
    if confidence.shape != correct.shape or confidence.ndim != 1:
        raise ValueError("confidence and correctness must be equal-length vectors")
    n = len(confidence)
    if n == 0:
        raise ValueError("calibration needs at least one sample")
    bins = bin_index(confidence, n_bins)
    counts = np.bincount(bins, minlength=n_bins)
    # correctly rounded per-bin sums: the table does not depend on sample order
    order = np.argsort(bins, kind="stable")
    groups = np.split(order, np.cumsum(counts)[:-1])
    hit = np.array([math.fsum(correct[g]) for g in groups])
    conf_sum = np.array([math.fsum(confidence[g]) for g in groups])
    filled = counts > 0
    acc = np.full(n_bins, np.nan)
    conf = np.full(n_bins, np.nan)
    acc[filled] = hit[filled] / counts[filled]
    conf[filled] = conf_sum[filled] / counts[filled]
    gap = np.abs(acc[filled] - conf[filled])
    mce = float(gap.max())
    ece = math.fsum(counts[filled] / n * gap)
    # a weighted mean never exceeds the max; clamp away last-bit rounding
    ece = min(ece, mce)
    return CalibrationTable(n_bins, counts, acc, conf, ece, mce)


def top1(p: PredictionMatrix, labels: Mapping[str, str]) -> tuple[np.ndarray, np.ndarray]:
    """Confidence and correctness of the top-1 prediction; ties go to the first column."""
    true = labels_to_columns(labels, p.sequence_ids, p.category_ids)
    predicted = np.argmax(p.values, axis=1)
    confidence = p.values[np.arange(len(predicted)), predicted]
    return confidence, predicted == true


def calibration_table(p: PredictionMatrix, labels: Mapping[str, str], m: int = DEFAULT_BINS) -> CalibrationTable:
    confidence, correct = top1(p, labels)
    return table_from_confidences(confidence, correct, m)


def ece(p: PredictionMatrix, labels: Mapping[str, str], m: int = DEFAULT_BINS) -> float:
    return calibration_table(p, labels, m).ece


def mce(p: PredictionMatrix, labels: Mapping[str, str], m: int = DEFAULT_BINS) -> float:
    return calibration_table(p, labels, m).mce
