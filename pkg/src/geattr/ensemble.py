"""Weighted probability averaging of aligned prediction matrices, and per-category analysis."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .data import PredictionMatrix
from .ranks import labels_to_columns, max_ranks
from .stats import geometric_mean


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class EnsembleSpec:
    members: tuple[PredictionMatrix, ...]
    weights: tuple[float, ...] | None = None  # None means uniform

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("an ensemble needs at least one member")
        object.__setattr__(self, "members", members)
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != len(members):
                raise ValueError(f"{len(w)} weights for {len(members)} members")
            if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-12:
                raise ValueError("weights must be non-negative and sum to 1")
            object.__setattr__(self, "weights", w)


def _symmetric_difference(a, b) -> list[str]:
    return sorted(set(a) ^ set(b))


def align(members: Sequence[PredictionMatrix]) -> list[PredictionMatrix]:
    """Reorder every member to the row/column order of the first one."""
    ref = members[0]
    aligned = [ref]
    for i, member in enumerate(members[1:], start=1):
        diff = _symmetric_difference(ref.sequence_ids, member.sequence_ids)
        if diff:
            raise AlignmentError(f"member {i} sequence ids differ from member 0: {diff}")
        diff = _symmetric_difference(ref.category_ids, member.category_ids)
        if diff:
            raise AlignmentError(f"member {i} category ids differ from member 0: {diff}")
        aligned.append(member.reorder(ref.sequence_ids, ref.category_ids))
    return aligned


def ensemble(spec: EnsembleSpec | Sequence[PredictionMatrix]) -> PredictionMatrix:
    if not isinstance(spec, EnsembleSpec):
        spec = EnsembleSpec(tuple(spec))
    members = align(spec.members)
    ref = members[0]
    if len(members) == 1:
        return ref
    stacked = np.stack([m.values for m in members])
    if spec.weights is None:
        values = stacked.sum(axis=0) / len(members)
    else:
        values = np.tensordot(np.asarray(spec.weights), stacked, axes=1)
    return PredictionMatrix(ref.sequence_ids, ref.category_ids, values)


@dataclass(frozen=True)
class SubsetAccuracy:
    size: int
    hits: dict[int, int]  # N -> rows with true rank <= N

    def accuracy(self, n: int) -> float | None:
        return self.hits[n] / self.size if self.size else None


@dataclass(frozen=True)
class CategoryAnalysis:
    target: str
    top10_inclusion_rate: float
    geometric_mean_rank: float
    true_frequency: float
    all_rows: SubsetAccuracy
    known_only: SubsetAccuracy
    target_only: SubsetAccuracy

    def accuracy_all(self, n: int) -> float | None:
        return self.all_rows.accuracy(n)

    def accuracy_known_only(self, n: int) -> float | None:
        return self.known_only.accuracy(n)

    def accuracy_target_only(self, n: int) -> float | None:
        return self.target_only.accuracy(n)

    def as_dict(self) -> dict:
        out = {
            "target": self.target,
            "top10_inclusion_rate": self.top10_inclusion_rate,
            "geometric_mean_rank": self.geometric_mean_rank,
            "true_frequency": self.true_frequency,
        }
        for name in ("all_rows", "known_only", "target_only"):
            subset = getattr(self, name)
            out[name] = {
                "size": subset.size,
                **{f"top{n}_accuracy": subset.accuracy(n) for n in sorted(subset.hits)},
            }
        return out


def category_analysis(
    p: PredictionMatrix,
    labels: Mapping[str, str],
    target: str,
    ns: Sequence[int] = (1, 10),
) -> CategoryAnalysis:
    """How a predictor treats one category, e.g. the pooled small-lab bucket."""
    cols = p.category_index()
    if target not in cols:
        raise KeyError(f"unknown target category {target!r}")
    ranks = max_ranks(p.values)
    true = labels_to_columns(labels, p.sequence_ids, p.category_ids)
    true_rank = ranks[np.arange(len(true)), true]
    target_rank = ranks[:, cols[target]]
    is_target = true == cols[target]

    def subset(mask):
        return SubsetAccuracy(
            int(mask.sum()), {n: int(np.count_nonzero(true_rank[mask] <= n)) for n in ns}
        )

    everything = np.ones(len(true), dtype=bool)
    return CategoryAnalysis(
        target=target,
        top10_inclusion_rate=float(np.count_nonzero(target_rank <= 10) / len(true)),
        geometric_mean_rank=geometric_mean(target_rank),
        true_frequency=float(is_target.sum() / len(true)),
        all_rows=subset(everything),
        known_only=subset(~is_target),
        target_only=subset(is_target),
    )
