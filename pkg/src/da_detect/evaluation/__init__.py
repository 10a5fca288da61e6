"""Detection metrics, analyses and chart output."""

from .analysis import (
    ABLATION_ROWS,
    SWEEP_MASKS,
    SWEEP_MODELS,
    ablation_table,
    scale_sweep,
    sweep_csv,
    sweep_series,
    table_csv,
    table_text,
)
from .metrics import (
    BACKGROUND,
    CORRECT,
    MISLOCALIZED,
    ErrorTaxonomy,
    EvalReport,
    average_precision,
    categorize_detections,
    collect_detections,
    detector_mean_best_overlap,
    error_bucket,
    evaluate_detections,
    evaluate_detector,
    match_detections,
    mean_average_precision,
    proposal_mean_best_overlap,
)
from .svg import line_chart, stacked_bar_chart, write_svg

__all__ = [
    "ABLATION_ROWS",
    "BACKGROUND",
    "CORRECT",
    "MISLOCALIZED",
    "SWEEP_MASKS",
    "SWEEP_MODELS",
    "ErrorTaxonomy",
    "EvalReport",
    "ablation_table",
    "average_precision",
    "categorize_detections",
    "collect_detections",
    "detector_mean_best_overlap",
    "error_bucket",
    "evaluate_detections",
    "evaluate_detector",
    "line_chart",
    "match_detections",
    "mean_average_precision",
    "proposal_mean_best_overlap",
    "scale_sweep",
    "stacked_bar_chart",
    "sweep_csv",
    "sweep_series",
    "table_csv",
    "table_text",
    "write_svg",
]
