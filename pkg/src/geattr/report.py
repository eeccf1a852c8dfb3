"""Metric reports: one JSON document per scored predictor, plus leaderboard and plot series."""

from __future__ import annotations

import csv
import hashlib
import json
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .calibration import DEFAULT_BINS, calibration_table
from .classification import category_counts, precision_recall_f1
from .data import PredictionMatrix
from .ensemble import category_analysis
from .ranks import DEFAULT_THRESHOLDS, accuracy_curve, misclassification_curve, rank_matrix, x_metric

TOP_N = (1, 5, 10, 20)


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _key(x: float) -> str:
    return f"{x:g}"


@dataclass
class MetricReport:
    name: str
    n_sequences: int
    n_categories: int
    accuracy_curve: list[float]
    top_n: dict[str, float]
    x_metrics: dict[str, int]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_category: list[dict]
    ece: float
    mce: float
    calibration_bins: list[dict]
    category_analysis: dict | None = None
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping) -> MetricReport:
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> MetricReport:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def summary(self) -> dict[str, object]:
        out: dict[str, object] = {"name": self.name}
        out.update({f"top{n}": v for n, v in self.top_n.items()})
        out.update({f"x{r}": v for r, v in self.x_metrics.items()})
        out.update(
            macro_precision=self.macro_precision,
            macro_recall=self.macro_recall,
            macro_f1=self.macro_f1,
            ece=self.ece,
            mce=self.mce,
        )
        return out


def build_report(
    p: PredictionMatrix,
    labels: Mapping[str, str],
    name: str = "predictor",
    bins: int = DEFAULT_BINS,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    target: str | None = None,
    provenance: Mapping | None = None,
) -> MetricReport:
    ranks = rank_matrix(p)
    curve = accuracy_curve(ranks, labels)
    k = ranks.n_categories
    counts = category_counts(ranks, labels)
    prf = precision_recall_f1(counts)
    table = calibration_table(p, labels, bins)
    per_category = [
        {
            "category_id": c,
            "tp": int(counts.tp[i]),
            "fp": int(counts.fp[i]),
            "fn": int(counts.fn[i]),
            "support": int(counts.support[i]),
            "precision": float(prf.precision[i]),
            "recall": float(prf.recall[i]),
            "f1": float(prf.f1[i]),
        }
        for i, c in enumerate(p.category_ids)
    ]
    return MetricReport(
        name=name,
        n_sequences=len(p.sequence_ids),
        n_categories=k,
        accuracy_curve=[float(v) for v in curve.values],
        top_n={str(n): curve.top(n) for n in TOP_N if n <= k},
        x_metrics={_key(r): x_metric(curve, r) for r in thresholds},
        macro_precision=prf.macro_precision,
        macro_recall=prf.macro_recall,
        macro_f1=prf.macro_f1,
        per_category=per_category,
        ece=table.ece,
        mce=table.mce,
        calibration_bins=[
            {"bin": b, "count": n, "accuracy": a, "confidence": c} for b, n, a, c in table.rows()
        ],
        category_analysis=category_analysis(p, labels, target).as_dict() if target else None,
        provenance={"tool_version": __version__, **(provenance or {})},
    )


LEADERBOARD_COLUMNS = ("rank", "name", "top1", "top10", "x95", "x99", "macro_f1", "ece", "mce")


def leaderboard(reports: Sequence[MetricReport]) -> list[dict]:
    """Rows sorted by top-10 accuracy (descending), then X99, then name."""

    def row(r: MetricReport) -> dict:
        return {
            "name": r.name,
            "top1": r.top_n.get("1"),
            "top10": r.top_n.get("10", 1.0),
            "x95": r.x_metrics.get("95"),
            "x99": r.x_metrics.get("99"),
            "macro_f1": r.macro_f1,
            "ece": r.ece,
            "mce": r.mce,
        }

    rows = [row(r) for r in reports]
    big = float("inf")
    rows.sort(key=lambda d: (-d["top10"], d["x99"] if d["x99"] is not None else big, d["name"]))
    for i, d in enumerate(rows, start=1):
        d["rank"] = i
    return [{c: d[c] for c in LEADERBOARD_COLUMNS} for d in rows]


def write_rows(rows: Sequence[Mapping], columns: Sequence[str], path_or_fh) -> None:
    def emit(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow(["" if r[c] is None else r[c] for c in columns])

    if hasattr(path_or_fh, "write"):
        emit(path_or_fh)
    else:
        with open(path_or_fh, "w", newline="", encoding="utf-8") as fh:
            emit(fh)


def plot_series(report: MetricReport) -> tuple[list[dict], list[dict]]:
    """Accuracy-curve rows (one per N) and calibration-bin rows."""
    miss = misclassification_curve(report.accuracy_curve)
    curve = [
        {"n": n, "accuracy": acc, "misclassification": float(m)}
        for n, (acc, m) in enumerate(zip(report.accuracy_curve, miss), start=1)
    ]
    return curve, list(report.calibration_bins)


def write_plotdata(report: MetricReport, out_dir: str | Path, svg: bool = False) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curve, bins = plot_series(report)
    written = [out_dir / "accuracy_curve.csv", out_dir / "calibration.csv"]
    write_rows(curve, ("n", "accuracy", "misclassification"), written[0])
    write_rows(bins, ("bin", "count", "accuracy", "confidence"), written[1])
    if svg:
        written += _write_svgs(report, curve, bins, out_dir)
    return written


def _write_svgs(report, curve, bins, out_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = [out_dir / "accuracy_curve.svg", out_dir / "reliability.svg"]
    # fixed hash salt keeps SVG element ids stable between runs
    matplotlib.rcParams["svg.hashsalt"] = "geattr"

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot([r["n"] for r in curve], [r["misclassification"] for r in curve])
    ax.set_xscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("1 - top-N accuracy")
    ax.set_title(report.name)
    fig.tight_layout()
    fig.savefig(paths[0], metadata={"Date": None})
    plt.close(fig)

    filled = [b for b in bins if b["count"]]
    n_bins = len(bins)
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.bar(
        [(b["bin"] - 0.5) / n_bins for b in filled],
        [b["accuracy"] for b in filled],
        width=1 / n_bins,
        edgecolor="black",
    )
    ax.plot([0, 1], [0, 1], linestyle="--", color="grey")
    ax.set_xlabel("confidence")
    ax.set_ylabel("accuracy")
    ax.set_title(f"ECE {report.ece:.3f}, MCE {report.mce:.3f}")
    fig.tight_layout()
    fig.savefig(paths[1], metadata={"Date": None})
    plt.close(fig)
    return paths
