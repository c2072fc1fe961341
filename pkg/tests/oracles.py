"""Independent reference implementations the test suite checks the library against.

Everything here is deliberately written from scratch (own IoU arithmetic,
own matching loops, own envelope scan) and stays simple rather than fast.
"""

from __future__ import annotations

import numpy as np

from smokewatch.geometry import BoxXYXY, Detection


def raster_iou(a: BoxXYXY, b: BoxXYXY, extent: float = 1000.0, grid: int = 1000) -> float:
    """IoU by rasterizing both boxes on a grid x grid lattice over [0, extent)^2.

    A cell counts as inside a box when its center is. For boxes with
    coordinates on the lattice this counting is exact.
    """
    cell = extent / grid
    centers = (np.arange(grid) + 0.5) * cell

    def mask(box: BoxXYXY) -> np.ndarray:
        in_x = (centers >= box.x1) & (centers <= box.x2)
        in_y = (centers >= box.y1) & (centers <= box.y2)
        return np.outer(in_y, in_x)

    mask_a = mask(a)
    mask_b = mask(b)
    inter = int(np.count_nonzero(mask_a & mask_b))
    union = int(np.count_nonzero(mask_a | mask_b))
    if union == 0:
        return 0.0
    return inter / union


def plain_iou(a: BoxXYXY, b: BoxXYXY) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a.x2 - a.x1) * (a.y2 - a.y1)
    area_b = (b.x2 - b.x1) * (b.y2 - b.y1)
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return inter / union


def reference_nms(dets: list[Detection], thresh: float) -> list[Detection]:
    """Plain-loop greedy NMS with the (conf desc, x1, y1) visiting order."""
    pending = sorted(dets, key=lambda d: (-d.confidence, d.box.x1, d.box.y1))
    kept: list[Detection] = []
    for det in pending:
        suppressed = False
        for other in kept:
            if other.class_id == det.class_id and plain_iou(det.box, other.box) >= thresh:
                suppressed = True
                break
        if not suppressed:
            kept.append(det)
    return kept


def brute_match(preds: dict, truths: dict, iou_thresh: float) -> list[dict]:
    """Greedy matching re-implemented with plain loops.

    Returns outcome dicts in the global sweep order
    (-confidence, image_id, class_id, x1, y1).
    """
    outcomes: list[dict] = []
    for image_id, dets in preds.items():
        gts = truths.get(image_id, [])
        classes = {d.class_id for d in dets}
        for cls in classes:
            class_dets = sorted(
                (d for d in dets if d.class_id == cls),
                key=lambda d: (-d.confidence, d.box.x1, d.box.y1),
            )
            class_truths = [(i, box) for i, (box, c) in enumerate(gts) if c == cls]
            used = set()
            for det in class_dets:
                best_iou = 0.0
                best = None
                for idx, (t_idx, t_box) in enumerate(class_truths):
                    if idx in used:
                        continue
                    v = plain_iou(det.box, t_box)
                    if v > best_iou:
                        best_iou = v
                        best = idx
                if best is not None and best_iou >= iou_thresh:
                    used.add(best)
                    outcomes.append(
                        {
                            "image_id": image_id,
                            "class_id": cls,
                            "confidence": det.confidence,
                            "x1": det.box.x1,
                            "y1": det.box.y1,
                            "tp": True,
                            "truth_index": class_truths[best][0],
                        }
                    )
                else:
                    outcomes.append(
                        {
                            "image_id": image_id,
                            "class_id": cls,
                            "confidence": det.confidence,
                            "x1": det.box.x1,
                            "y1": det.box.y1,
                            "tp": False,
                            "truth_index": None,
                        }
                    )
    outcomes.sort(key=lambda o: (-o["confidence"], o["image_id"], o["class_id"], o["x1"], o["y1"]))
    return outcomes


def brute_ap(outcomes: list[dict], total_gt: int) -> float:
    """AP by explicit prefix enumeration and a naive right-max envelope."""
    if total_gt == 0 or not outcomes:
        return 0.0
    recalls: list[float] = []
    precisions: list[float] = []
    tp = 0
    for k, o in enumerate(outcomes, start=1):
        if o["tp"]:
            tp += 1
        recalls.append(tp / total_gt)
        precisions.append(tp / k)
    ap = 0.0
    prev_r = 0.0
    for i, r in enumerate(recalls):
        env = max(precisions[i:])  # naive O(n^2) right-envelope on purpose
        ap += (r - prev_r) * env
        prev_r = r
    return ap


def brute_evaluate(preds: dict, truths: dict, iou_thresh: float = 0.5):
    """Per-class AP, mAP over classes with ground truth, and pooled TP/FP counts."""
    gt_counts: dict[int, int] = {}
    for boxes in truths.values():
        for _, cls in boxes:
            gt_counts[cls] = gt_counts.get(cls, 0) + 1
    outcomes = brute_match(preds, truths, iou_thresh)
    per_class: dict[int, float] = {}
    for cls, total in gt_counts.items():
        cls_outcomes = [o for o in outcomes if o["class_id"] == cls]
        per_class[cls] = brute_ap(cls_outcomes, total)
    mean_ap = sum(per_class.values()) / len(per_class) if per_class else 0.0
    tps = sum(1 for o in outcomes if o["tp"])
    fps = len(outcomes) - tps
    return per_class, mean_ap, tps, fps


def brute_f1_at(preds: dict, truths: dict, iou_thresh: float, threshold: float) -> float:
    """Micro-averaged F1 at one confidence threshold, re-matching from scratch."""
    kept = {
        image_id: [d for d in dets if d.confidence >= threshold]
        for image_id, dets in preds.items()
    }
    outcomes = brute_match(kept, truths, iou_thresh)
    total_gt = sum(len(v) for v in truths.values())
    n = len(outcomes)
    tp = sum(1 for o in outcomes if o["tp"])
    precision = tp / n if n else 0.0
    recall = tp / total_gt if total_gt else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def brute_best_f1(preds: dict, truths: dict, iou_thresh: float, thresholds) -> tuple[float, float]:
    """Best (threshold, f1) over the given thresholds, smallest threshold on ties."""
    best_t = None
    best_f = -1.0
    for t in sorted(thresholds):
        f = brute_f1_at(preds, truths, iou_thresh, t)
        if f > best_f:
            best_f = f
            best_t = t
    return best_t, best_f
