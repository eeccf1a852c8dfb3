"""Per-category rank-1 counts and macro-averaged precision, recall and F1."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .ranks import RankMatrix, labels_to_columns


@dataclass(frozen=True, eq=False)
class CategoryCounts:
    category_ids: tuple[str, ...]
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    support: np.ndarray

    def as_dict(self) -> dict[str, dict[str, int]]:
        return {
            c: {"tp": int(tp), "fp": int(fp), "fn": int(fn), "support": int(s)}
            for c, tp, fp, fn, s in zip(self.category_ids, self.tp, self.fp, self.fn, self.support)
        }


@dataclass(frozen=True, eq=False)
class PRFReport:
    category_ids: tuple[str, ...]
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float


def category_counts(r: RankMatrix, labels: Mapping[str, str]) -> CategoryCounts:
    """Count rank-1 outcomes per category.

    A row whose best probability is shared by several categories has no
    rank-1 entry at all under max-rank ties, so it only adds a false negative.
    """
    k = r.n_categories
    true = labels_to_columns(labels, r.sequence_ids, r.category_ids)
    rows, predicted = np.nonzero(r.ranks == 1)
    correct = predicted == true[rows]
    tp = np.bincount(predicted[correct], minlength=k)
    fp = np.bincount(predicted[~correct], minlength=k)
    support = np.bincount(true, minlength=k)
    return CategoryCounts(r.category_ids, tp, fp, support - tp, support)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(len(num), dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def precision_recall_f1(counts: CategoryCounts, exclude_undefined: bool = False) -> PRFReport:
    """Per-category and macro precision/recall/F1.

    0/0 yields 0 and the category stays in the macro mean. With
    ``exclude_undefined`` a category is left out of a macro mean when its
    metric has a zero denominator (F1 is undefined when either side is).
    """
    tp = counts.tp.astype(np.float64)
    pred_den = counts.tp + counts.fp
    true_den = counts.tp + counts.fn
    precision = _ratio(tp, pred_den)
    recall = _ratio(tp, true_den)
    f1 = _ratio(2 * precision * recall, precision + recall)

    if exclude_undefined:
        p_ok, r_ok = pred_den > 0, true_den > 0
        f_ok = p_ok & r_ok
        macro = [float(v[m].mean()) if m.any() else 0.0 for v, m in ((precision, p_ok), (recall, r_ok), (f1, f_ok))]
    else:
        macro = [float(precision.mean()), float(recall.mean()), float(f1.mean())]
    return PRFReport(counts.category_ids, precision, recall, f1, *macro)
