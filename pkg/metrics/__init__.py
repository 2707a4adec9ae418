"""
Evaluation metrics for tracking models
"""

from .tracking_metrics import MetricsReport, TrackingMetricsCalculator, evaluate, METRIC_COLUMNS

__all__ = ["MetricsReport", "TrackingMetricsCalculator", "evaluate", "METRIC_COLUMNS"]
