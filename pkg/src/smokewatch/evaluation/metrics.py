"""Matching, precision/recall curves, average precision, and the F1 sweep.

Conventions pinned here for reproducibility:

* Matching is greedy per image and per class, visiting predictions by
  descending confidence (ties: smaller box x1, then y1); each prediction
  takes the unmatched ground truth with the highest IoU when that IoU
  reaches the threshold, with equal-IoU ties going to the earliest truth.
* The global confidence sweep orders outcomes by (-confidence, image_id,
  class_id, x1, y1). Tie order matters to AP, so it is fixed.
* AP uses all-point interpolation: precision is replaced by its monotone
  non-increasing envelope from the right, then summed over recall steps.
* The F1 sweep is micro-averaged over the whole set. Because greedy
  matching visits predictions in descending confidence, the outcomes for
  the subset with confidence >= t are exactly a prefix of the full run,
  so the sweep reuses one matching pass instead of re-matching per
  threshold; tests verify equivalence against literal re-matching.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..geometry import BoxXYXY, Detection

GroundTruthSet = Mapping[str, Sequence[tuple[BoxXYXY, int]]]
PredictionSet = Mapping[str, Sequence[Detection]]


@dataclass(frozen=True)
class MatchOutcome:
    """One prediction's fate: true positive with its matched truth, or false positive."""

    image_id: str
    class_id: int
    confidence: float
    box: BoxXYXY
    is_tp: bool
    truth_index: int | None = None

    def __post_init__(self) -> None:
        if self.is_tp != (self.truth_index is not None):
            raise ValueError("is_tp must hold exactly when a truth is matched")


@dataclass(frozen=True)
class PRPoint:
    recall: float
    precision: float
    threshold: float


@dataclass(frozen=True)
class PRCurve:
    points: tuple[PRPoint, ...]
    total_gt: int


@dataclass(frozen=True)
class F1Point:
    threshold: float
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class F1Curve:
    points: tuple[F1Point, ...]
    best: tuple[float, float]  # (threshold, f1), smallest threshold on ties


@dataclass(frozen=True)
class EvalCounts:
    images: int
    gts: int
    preds: int
    tps: int
    fps: int


@dataclass(frozen=True)
class EvalReport:
    per_class_ap: dict[int, float]
    mean_ap: float
    f1_curve: F1Curve
    pr_curves: dict[int, PRCurve]
    counts: EvalCounts
    iou_thresh: float


def _sweep_key(o: MatchOutcome) -> tuple:
    return (-o.confidence, o.image_id, o.class_id, o.box.x1, o.box.y1)


def match_detections(
    preds: PredictionSet, truths: GroundTruthSet, iou_thresh: float
) -> list[MatchOutcome]:
    """Greedily match predictions to ground truths at the IoU threshold.

    Returns one outcome per prediction, in global sweep order.
    """
    if not (0.0 < iou_thresh <= 1.0):
        raise ValueError(f"iou_thresh must be in (0,1], got {iou_thresh}")
    outcomes: list[MatchOutcome] = []
    for image_id, dets in preds.items():
        gts = truths.get(image_id, ())
        truths_by_class: dict[int, list[tuple[int, BoxXYXY]]] = {}
        for t_idx, (box, cls) in enumerate(gts):
            truths_by_class.setdefault(cls, []).append((t_idx, box))
        preds_by_class: dict[int, list[Detection]] = {}
        for det in dets:
            preds_by_class.setdefault(det.class_id, []).append(det)

        for cls, class_dets in preds_by_class.items():
            class_dets.sort(key=lambda d: (-d.confidence, d.box.x1, d.box.y1))
            candidates = truths_by_class.get(cls, [])
            if not candidates:
                outcomes.extend(
                    MatchOutcome(image_id, cls, d.confidence, d.box, False) for d in class_dets
                )
                continue
            tx1 = np.array([b.x1 for _, b in candidates])
            ty1 = np.array([b.y1 for _, b in candidates])
            tx2 = np.array([b.x2 for _, b in candidates])
            ty2 = np.array([b.y2 for _, b in candidates])
            t_area = (tx2 - tx1) * (ty2 - ty1)
            taken = np.zeros(len(candidates), dtype=bool)
            for det in class_dets:
                b = det.box
                iw = np.minimum(b.x2, tx2) - np.maximum(b.x1, tx1)
                ih = np.minimum(b.y2, ty2) - np.maximum(b.y1, ty1)
                inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
                union = b.area + t_area - inter
                with np.errstate(divide="ignore", invalid="ignore"):
                    overlap = np.where(union > 0.0, inter / union, 0.0)
                overlap[taken] = -1.0
                j = int(np.argmax(overlap))  # argmax takes the earliest truth on ties
                if overlap[j] >= iou_thresh:
                    taken[j] = True
                    outcomes.append(
                        MatchOutcome(image_id, cls, det.confidence, b, True, candidates[j][0])
                    )
                else:
                    outcomes.append(MatchOutcome(image_id, cls, det.confidence, b, False))
    outcomes.sort(key=_sweep_key)
    return outcomes


def pr_curve(outcomes: Sequence[MatchOutcome], total_gt: int) -> PRCurve:
    """Prefix precision/recall along the descending-confidence sweep.

    Sorting is stable, so equal-confidence outcomes keep the caller's order.
    """
    if total_gt < 0:
        raise ValueError(f"total_gt must be >= 0, got {total_gt}")
    ordered = sorted(outcomes, key=lambda o: -o.confidence)
    points: list[PRPoint] = []
    tp = 0
    for k, o in enumerate(ordered, start=1):
        if o.is_tp:
            tp += 1
        recall = tp / total_gt if total_gt else 0.0
        points.append(PRPoint(recall=recall, precision=tp / k, threshold=o.confidence))
    return PRCurve(points=tuple(points), total_gt=total_gt)


def average_precision(curve: PRCurve) -> float:
    """All-point interpolated AP over the curve's sweep points."""
    pts = curve.points
    if not pts or curve.total_gt == 0:
        return 0.0
    envelope = [p.precision for p in pts]
    for i in range(len(envelope) - 2, -1, -1):
        envelope[i] = max(envelope[i], envelope[i + 1])
    ap = 0.0
    prev_recall = 0.0
    for point, env in zip(pts, envelope):
        ap += (point.recall - prev_recall) * env
        prev_recall = point.recall
    return ap


def f1(precision: float, recall: float) -> float:
    """Harmonic combination of precision and recall; 0 when both are 0."""
    if precision < 0 or recall < 0 or precision > 1 or recall > 1:
        raise ValueError(f"precision/recall outside [0,1]: {precision}, {recall}")
    denom = precision + recall
    if denom == 0.0:
        return 0.0
    return 2.0 * precision * recall / denom


def _f1_points(outcomes: Sequence[MatchOutcome], total_gt: int) -> F1Curve:
    confidences = [o.confidence for o in outcomes]  # descending by sweep order
    ascending = confidences[::-1]
    cum_tp = [0]
    for o in outcomes:
        cum_tp.append(cum_tp[-1] + (1 if o.is_tp else 0))
    thresholds = sorted({0.0, *confidences})
    points: list[F1Point] = []
    for t in thresholds:
        kept = len(ascending) - bisect_left(ascending, t)
        tp = cum_tp[kept]
        precision = tp / kept if kept else 0.0
        recall = tp / total_gt if total_gt else 0.0
        points.append(F1Point(threshold=t, precision=precision, recall=recall, f1=f1(precision, recall)))
    best_t, best_f = points[0].threshold, points[0].f1
    for pt in points[1:]:
        if pt.f1 > best_f:
            best_t, best_f = pt.threshold, pt.f1
    return F1Curve(points=tuple(points), best=(best_t, best_f))


def f1_curve(preds: PredictionSet, truths: GroundTruthSet, iou_thresh: float = 0.5) -> F1Curve:
    """Micro-averaged F1 across confidence thresholds {0} + distinct confidences."""
    outcomes = match_detections(preds, truths, iou_thresh)
    total_gt = sum(len(v) for v in truths.values())
    return _f1_points(outcomes, total_gt)


def evaluate(
    preds: PredictionSet, truths: GroundTruthSet, iou_thresh: float = 0.5
) -> EvalReport:
    """Full report: per-class AP, mAP over classes with ground truth, F1 sweep, counts."""
    outcomes = match_detections(preds, truths, iou_thresh)

    gt_counts: dict[int, int] = {}
    for boxes in truths.values():
        for _, cls in boxes:
            gt_counts[cls] = gt_counts.get(cls, 0) + 1
    pred_classes = {o.class_id for o in outcomes}

    per_class_ap: dict[int, float] = {}
    pr_curves: dict[int, PRCurve] = {}
    for cls in sorted(set(gt_counts) | pred_classes):
        cls_outcomes = [o for o in outcomes if o.class_id == cls]
        total = gt_counts.get(cls, 0)
        curve = pr_curve(cls_outcomes, total)
        pr_curves[cls] = curve
        if total > 0:
            per_class_ap[cls] = average_precision(curve)

    mean_ap = sum(per_class_ap.values()) / len(per_class_ap) if per_class_ap else 0.0
    total_gt = sum(gt_counts.values())
    curve = _f1_points(outcomes, total_gt)

    tps = sum(1 for o in outcomes if o.is_tp)
    counts = EvalCounts(
        images=len(set(preds) | set(truths)),
        gts=total_gt,
        preds=len(outcomes),
        tps=tps,
        fps=len(outcomes) - tps,
    )
    return EvalReport(
        per_class_ap=per_class_ap,
        mean_ap=mean_ap,
        f1_curve=curve,
        pr_curves=pr_curves,
        counts=counts,
        iou_thresh=iou_thresh,
    )
