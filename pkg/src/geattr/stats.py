"""Small statistics used when comparing predictors across a leaderboard."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata


def spearman(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Spearman's rho with average ranks for ties.

    Returns None when either argument has no rank variance.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if len(x) < 2:
        raise ValueError("spearman needs at least two observations")
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        return None
    rho = float(dx @ dy) / denom
    return max(-1.0, min(1.0, rho))


def geometric_mean(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("geometric mean of an empty sequence")
    if np.any(values <= 0):
        raise ValueError("geometric mean needs strictly positive values")
    # base-2 logs keep powers of two exact
    return float(2.0 ** (math.fsum(np.log2(values)) / values.size))


def decile_sizes(n: int, groups: int = 10) -> list[int]:
    base, extra = divmod(n, groups)
    return [base + 1 if i < extra else base for i in range(groups)]


def decile_groups(
    scores: Mapping[str, float] | Sequence[float],
    summary: str = "mean",
    groups: int = 10,
) -> list[dict]:
    """Split teams into ``groups`` contiguous bands by descending score.

    Earlier (better) bands absorb the remainder. Each band reports its
    members and a mean or geometric-mean summary of their scores (None for
    empty bands).
    """
    if isinstance(scores, Mapping):
        items = list(scores.items())
    else:
        items = list(enumerate(scores))
    if not items:
        raise ValueError("no teams to group")
    if summary not in ("mean", "geometric"):
        raise ValueError(f"unknown summary {summary!r}")
    # stable sort keeps input order among equal scores
    items.sort(key=lambda kv: -kv[1])
    out = []
    start = 0
    for i, size in enumerate(decile_sizes(len(items), groups)):
        band = items[start : start + size]
        start += size
        vals = [v for _, v in band]
        if not vals:
            value = None
        elif summary == "mean":
            value = math.fsum(vals) / len(vals)
        else:
            value = geometric_mean(vals)
        out.append({"decile": i + 1, "members": [k for k, _ in band], "scores": vals, "summary": value})
    return out
