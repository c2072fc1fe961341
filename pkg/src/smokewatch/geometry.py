"""Bounding-box geometry: box formats, IoU, greedy NMS, letterbox transforms.

Boxes are half-open real rectangles in a top-left-origin pixel frame;
area is (x2-x1)*(y2-y1) with no "+1" pixel convention. Everything here is
a pure function on immutable values and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Slack allowed when normalized boxes poke past the image edge before clamping.
EDGE_EPS = 1e-6

DEFAULT_INPUT_SIDE = 640


@dataclass(frozen=True)
class BoxXYXY:
    """Axis-aligned box in pixel corner form (x1, y1) top-left, (x2, y2) bottom-right."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValueError(f"box coordinates must be finite, got {self!r}")
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValueError(f"box corners out of order: {self!r}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)


@dataclass(frozen=True)
class YoloBox:
    """Normalized center-form box: class id plus (cx, cy, w, h) as image fractions."""

    class_id: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise ValueError(f"class_id must be non-negative, got {self.class_id}")
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise ValueError(f"center outside [0,1]: {self!r}")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise ValueError(f"size outside (0,1]: {self!r}")
        if self.cx - self.w / 2 < -EDGE_EPS or self.cx + self.w / 2 > 1.0 + EDGE_EPS:
            raise ValueError(f"box extends past horizontal edge: {self!r}")
        if self.cy - self.h / 2 < -EDGE_EPS or self.cy + self.h / 2 > 1.0 + EDGE_EPS:
            raise ValueError(f"box extends past vertical edge: {self!r}")


@dataclass(frozen=True)
class Detection:
    """One detector output: box, class, and confidence in [0,1]."""

    box: BoxXYXY
    class_id: int
    confidence: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence outside [0,1]: {self.confidence}")


@dataclass(frozen=True)
class LetterboxTransform:
    """Aspect-preserving resize plan into a dst_side x dst_side square with centered pads."""

    scale: float
    pad_x: float
    pad_y: float
    src_w: int
    src_h: int
    dst_side: int


def iou(a: BoxXYXY, b: BoxXYXY) -> float:
    """Intersection area over union area; 0 when the union has zero area."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def yolo_to_xyxy(b: YoloBox, img_w: float, img_h: float) -> BoxXYXY:
    """Normalized center form to pixel corners, clamped into the image rectangle."""
    if img_w <= 0 or img_h <= 0:
        raise ValueError(f"image dimensions must be positive, got {img_w}x{img_h}")
    x1 = (b.cx - b.w / 2.0) * img_w
    y1 = (b.cy - b.h / 2.0) * img_h
    x2 = (b.cx + b.w / 2.0) * img_w
    y2 = (b.cy + b.h / 2.0) * img_h
    return BoxXYXY(
        x1=min(max(x1, 0.0), img_w),
        y1=min(max(y1, 0.0), img_h),
        x2=min(max(x2, 0.0), img_w),
        y2=min(max(y2, 0.0), img_h),
    )


def xyxy_to_yolo(box: BoxXYXY, img_w: float, img_h: float, class_id: int = 0) -> YoloBox:
    """Pixel corners back to normalized center form (inverse of yolo_to_xyxy)."""
    if img_w <= 0 or img_h <= 0:
        raise ValueError(f"image dimensions must be positive, got {img_w}x{img_h}")
    cx = (box.x1 + box.x2) / 2.0 / img_w
    cy = (box.y1 + box.y2) / 2.0 / img_h
    w = (box.x2 - box.x1) / img_w
    h = (box.y2 - box.y1) / img_h
    return YoloBox(
        class_id=class_id,
        cx=min(max(cx, 0.0), 1.0),
        cy=min(max(cy, 0.0), 1.0),
        w=min(w, 1.0),
        h=min(h, 1.0),
    )


def _det_order_key(d: Detection) -> tuple[float, float, float]:
    return (-d.confidence, d.box.x1, d.box.y1)


def nms(dets: list[Detection], iou_thresh: float) -> list[Detection]:
    """Greedy per-class non-maximum suppression.

    Candidates are visited by descending confidence (ties: smaller x1, then
    y1); one is kept iff its IoU with every already-kept detection of the
    same class is strictly below ``iou_thresh``. Output preserves the
    descending-confidence visit order.
    """
    if not (0.0 <= iou_thresh <= 1.0):
        raise ValueError(f"iou_thresh outside [0,1]: {iou_thresh}")
    if not dets:
        return []
    order = sorted(range(len(dets)), key=lambda i: _det_order_key(dets[i]))
    x1 = np.array([dets[i].box.x1 for i in order])
    y1 = np.array([dets[i].box.y1 for i in order])
    x2 = np.array([dets[i].box.x2 for i in order])
    y2 = np.array([dets[i].box.y2 for i in order])
    cls = np.array([dets[i].class_id for i in order])
    areas = (x2 - x1) * (y2 - y1)

    keep: list[int] = []
    live = np.arange(len(order))
    while live.size:
        head = live[0]
        keep.append(head)
        rest = live[1:]
        if rest.size == 0:
            break
        iw = np.minimum(x2[head], x2[rest]) - np.maximum(x1[head], x1[rest])
        ih = np.minimum(y2[head], y2[rest]) - np.maximum(y1[head], y1[rest])
        inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
        union = areas[head] + areas[rest] - inter
        with np.errstate(divide="ignore", invalid="ignore"):
            overlap = np.where(union > 0.0, inter / union, 0.0)
        suppressed = (overlap >= iou_thresh) & (cls[rest] == cls[head])
        live = rest[~suppressed]
    return [dets[order[i]] for i in keep]


def letterbox_plan(src_w: int, src_h: int, dst_side: int = DEFAULT_INPUT_SIDE) -> LetterboxTransform:
    """Plan the aspect-preserving fit of src_w x src_h into dst_side x dst_side."""
    if src_w <= 0 or src_h <= 0 or dst_side <= 0:
        raise ValueError(f"dimensions must be positive, got {src_w}x{src_h} -> {dst_side}")
    scale = min(dst_side / src_w, dst_side / src_h)
    pad_x = (dst_side - src_w * scale) / 2.0
    pad_y = (dst_side - src_h * scale) / 2.0
    return LetterboxTransform(
        scale=scale, pad_x=pad_x, pad_y=pad_y, src_w=src_w, src_h=src_h, dst_side=dst_side
    )


def map_forward(box: BoxXYXY, t: LetterboxTransform) -> BoxXYXY:
    """Source-frame box to letterbox-frame coordinates."""
    return BoxXYXY(
        x1=box.x1 * t.scale + t.pad_x,
        y1=box.y1 * t.scale + t.pad_y,
        x2=box.x2 * t.scale + t.pad_x,
        y2=box.y2 * t.scale + t.pad_y,
    )


def map_back(box: BoxXYXY, t: LetterboxTransform) -> BoxXYXY:
    """Letterbox-frame box back to the source frame, clamped to image bounds."""
    x1 = (box.x1 - t.pad_x) / t.scale
    y1 = (box.y1 - t.pad_y) / t.scale
    x2 = (box.x2 - t.pad_x) / t.scale
    y2 = (box.y2 - t.pad_y) / t.scale
    return BoxXYXY(
        x1=min(max(x1, 0.0), t.src_w),
        y1=min(max(y1, 0.0), t.src_h),
        x2=min(max(x2, 0.0), t.src_w),
        y2=min(max(y2, 0.0), t.src_h),
    )
