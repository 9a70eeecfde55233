"""Calibration metrics for binary probability estimators.

Accuracy, Brier score (with its calibration/sharpness split), binned ECE/MCE
and the Balance score, plus the simulation and quadrature machinery used to
compare them against known ground truth.
"""
from __future__ import annotations

from probcal.metrics import (
    BinStats,
    BrierDecomposition,
    MetricReport,
    Prediction,
    PredictionSet,
    compute_bins,
    decompose_brier,
    full_report,
    score_accuracy,
    score_balance,
    score_brier,
    score_ece,
    score_mce,
)
from probcal.scoring import ScoringRule
from probcal.synthetic import (
    ProbDistribution,
    ScoredBatch,
    SyntheticModel,
    apply_model,
    generate_batch,
    sample_probs,
)
from probcal.expected import (
    QuadratureSpec,
    expected_score_mc,
    expected_score_quadrature,
    pointwise_expected,
    true_ece_analytic,
)

__version__ = "0.1.0"

__all__ = [
    "BinStats",
    "BrierDecomposition",
    "MetricReport",
    "Prediction",
    "PredictionSet",
    "ProbDistribution",
    "QuadratureSpec",
    "ScoredBatch",
    "ScoringRule",
    "SyntheticModel",
    "apply_model",
    "compute_bins",
    "decompose_brier",
    "expected_score_mc",
    "expected_score_quadrature",
    "full_report",
    "generate_batch",
    "pointwise_expected",
    "sample_probs",
    "score_accuracy",
    "score_balance",
    "score_brier",
    "score_ece",
    "score_mce",
    "true_ece_analytic",
]
