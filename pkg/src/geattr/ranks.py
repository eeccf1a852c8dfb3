"""Rank matrices, top-N accuracy curves and X-metrics.

Ties are resolved pessimistically: every member of a tie group gets the
largest position in that group, so spreading probability uniformly over many
categories cannot buy accuracy.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .data import PredictionMatrix

DEFAULT_THRESHOLDS = (80, 90, 95, 99)


@dataclass(frozen=True, eq=False)
class RankMatrix:
    sequence_ids: tuple[str, ...]
    category_ids: tuple[str, ...]
    ranks: np.ndarray

    def __post_init__(self):
        self.ranks.setflags(write=False)

    @property
    def n_categories(self) -> int:
        return len(self.category_ids)

    def true_ranks(self, labels: Mapping[str, str]) -> np.ndarray:
        """Rank of the true category in every row."""
        cols = labels_to_columns(labels, self.sequence_ids, self.category_ids)
        return self.ranks[np.arange(len(cols)), cols]


def labels_to_columns(labels, sequence_ids, category_ids) -> np.ndarray:
    if hasattr(labels, "true_indices"):
        return labels.true_indices(sequence_ids, category_ids)
    col = {c: i for i, c in enumerate(category_ids)}
    out = np.empty(len(sequence_ids), dtype=np.intp)
    for i, s in enumerate(sequence_ids):
        if s not in labels:
            raise KeyError(f"no label for sequence {s!r}")
        if labels[s] not in col:
            raise ValueError(f"label {labels[s]!r} of sequence {s!r} is not a known category")
        out[i] = col[labels[s]]
    return out


def max_ranks(values: np.ndarray) -> np.ndarray:
    """Row-wise ranks where rank(v) = number of entries in the row >= v."""
    values = np.asarray(values, dtype=np.float64)
    n_rows, k = values.shape
    ordered = np.sort(values, axis=1)
    ranks = np.empty((n_rows, k), dtype=np.int64)
    for i in range(n_rows):
        # entries strictly below v sit to the left of searchsorted(..., "left")
        ranks[i] = k - np.searchsorted(ordered[i], values[i], side="left")
    return ranks


def rank_matrix(p: PredictionMatrix) -> RankMatrix:
    return RankMatrix(p.sequence_ids, p.category_ids, max_ranks(p.values))


@dataclass(frozen=True, eq=False)
class AccuracyCurve:
    """Top-N hit counts for N = 1..K over ``total`` rows."""

    counts: np.ndarray
    total: int

    def __post_init__(self):
        self.counts.setflags(write=False)

    @property
    def values(self) -> np.ndarray:
        return self.counts / self.total

    def __len__(self) -> int:
        return len(self.counts)

    def __getitem__(self, n_minus_one):
        return self.values[n_minus_one]

    def top(self, n: int) -> float:
        return float(self.counts[n - 1] / self.total)


def top_n_accuracy(r: RankMatrix, labels: Mapping[str, str], n: int) -> float:
    k = r.n_categories
    if not 1 <= n <= k:
        raise ValueError(f"n must lie in [1, {k}], got {n}")
    true = r.true_ranks(labels)
    return int(np.count_nonzero(true <= n)) / len(true)


def accuracy_curve(r: RankMatrix, labels: Mapping[str, str]) -> AccuracyCurve:
    true = r.true_ranks(labels)
    hist = np.bincount(true, minlength=r.n_categories + 1)[1:]
    return AccuracyCurve(np.cumsum(hist), len(true))


def x_metric(curve: AccuracyCurve | Sequence[float], r_threshold: float) -> int:
    """Smallest N whose top-N accuracy is at least ``r_threshold`` percent."""
    if not 0 < r_threshold <= 100:
        raise ValueError(f"threshold must be in (0, 100], got {r_threshold}")
    if isinstance(curve, AccuracyCurve):
        # integer comparison avoids rounding in count/total
        reached = curve.counts * 100 >= r_threshold * curve.total
    else:
        reached = np.asarray(curve, dtype=np.float64) >= r_threshold / 100
    hits = np.flatnonzero(reached)
    if hits.size == 0:
        # cannot happen for curves built from max-rank matrices, which end at 1
        raise ValueError(f"curve never reaches {r_threshold}%")
    return int(hits[0]) + 1


def x_metrics(curve, thresholds=DEFAULT_THRESHOLDS) -> dict[float, int]:
    return {r: x_metric(curve, r) for r in thresholds}


def misclassification_curve(curve: AccuracyCurve | Sequence[float]) -> np.ndarray:
    values = curve.values if isinstance(curve, AccuracyCurve) else np.asarray(curve, dtype=np.float64)
    return 1.0 - values
