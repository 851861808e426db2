"""Fairness-aware admission prediction: ingestion, five classifiers, audits and reports."""

__version__ = "0.1.0"

from .data import CleaningLog, CleaningRule, DataTable, clean_anomalies, merge_outer, parse_csv  # noqa: E402
from .evaluation import CvConfig, EvaluationReport, compute_metrics, kfold_cv, select_best  # noqa: E402
from .fairness import audit, demographic_parity_gap, equalized_odds_gap  # noqa: E402
from .features import FeatureMatrix, TableVectorizer, ZScoreScaler  # noqa: E402
from .models import make_model  # noqa: E402
from .synthetic import SyntheticConfig, generate_synthetic  # noqa: E402

__all__ = [
    "CleaningLog", "CleaningRule", "CvConfig", "DataTable", "EvaluationReport", "FeatureMatrix",
    "SyntheticConfig", "TableVectorizer", "ZScoreScaler", "audit", "clean_anomalies", "compute_metrics",
    "demographic_parity_gap", "equalized_odds_gap", "generate_synthetic", "kfold_cv", "make_model",
    "merge_outer", "parse_csv", "select_best",
]
