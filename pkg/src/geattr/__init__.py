"""Evaluation, calibration, ensembling and baseline tooling for lab-of-origin attribution."""

__version__ = "0.1.0"

from .data import (
    LabelMap,
    LineageGraph,
    ParseError,
    PredictionMatrix,
    SequenceRecord,
    ValidationReport,
    load_fasta,
    load_labels,
    load_lineage,
    load_predictions,
    validate,
)
from .ranks import (
    AccuracyCurve,
    RankMatrix,
    accuracy_curve,
    misclassification_curve,
    rank_matrix,
    top_n_accuracy,
    x_metric,
)
from .classification import category_counts, precision_recall_f1
from .calibration import calibration_table, ece, mce
from .ensemble import ensemble
from .stats import decile_groups, geometric_mean, spearman

__all__ = [
    "AccuracyCurve",
    "LabelMap",
    "LineageGraph",
    "ParseError",
    "PredictionMatrix",
    "RankMatrix",
    "SequenceRecord",
    "ValidationReport",
    "accuracy_curve",
    "calibration_table",
    "category_counts",
    "decile_groups",
    "ece",
    "ensemble",
    "geometric_mean",
    "load_fasta",
    "load_labels",
    "load_lineage",
    "load_predictions",
    "mce",
    "misclassification_curve",
    "precision_recall_f1",
    "rank_matrix",
    "spearman",
    "top_n_accuracy",
    "validate",
    "x_metric",
]
