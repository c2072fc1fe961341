"""Detection-quality metrics: IoU-threshold matching, PR/AP, and the F1 sweep."""

from .metrics import (
    EvalCounts,
    EvalReport,
    F1Curve,
    F1Point,
    GroundTruthSet,
    MatchOutcome,
    PRCurve,
    PRPoint,
    PredictionSet,
    average_precision,
    evaluate,
    f1,
    f1_curve,
    match_detections,
    pr_curve,
)
from .reports import (
    format_summary,
    load_predictions,
    manifest_to_truths,
    render_curve_svg,
    report_to_dict,
    save_predictions,
    write_f1_csv,
    write_pr_csv,
    write_report_files,
)

__all__ = [
    "EvalCounts",
    "EvalReport",
    "F1Curve",
    "F1Point",
    "GroundTruthSet",
    "MatchOutcome",
    "PRCurve",
    "PRPoint",
    "PredictionSet",
    "average_precision",
    "evaluate",
    "f1",
    "f1_curve",
    "match_detections",
    "pr_curve",
    "format_summary",
    "load_predictions",
    "manifest_to_truths",
    "render_curve_svg",
    "report_to_dict",
    "save_predictions",
    "write_f1_csv",
    "write_pr_csv",
    "write_report_files",
]
