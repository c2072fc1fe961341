"""Detector contract types and the post-processing chain.

The service never hosts a neural network; backends satisfy ``detect()``
either by scripted fixtures (mock) or by calling an external model server
over the wire protocol. Raw detections arrive in the letterbox frame of
``input_side`` and post-processing maps them back to source pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

from ..geometry import (
    DEFAULT_INPUT_SIDE,
    Detection,
    LetterboxTransform,
    map_back,
    nms,
)
from ..images import ImageRGB

# Best-F1 operating point of the qualified smoke model; cameras can override it.
DEFAULT_CONF_FLOOR = 0.298
DEFAULT_NMS_IOU = 0.45


class BackendError(Exception):
    """Detector backend failure (unreachable, timeout, bad payload); carries the cause."""


class ProtocolError(BackendError):
    """Wire payload violates the protocol; names the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass(frozen=True)
class DetectorConfig:
    backend: str = "mock"  # "mock" | "external"
    endpoint: str | None = None
    fixture_path: str | None = None
    input_side: int = DEFAULT_INPUT_SIDE
    conf_floor: float = DEFAULT_CONF_FLOOR
    nms_iou: float = DEFAULT_NMS_IOU
    timeout_s: float = 10.0

    def __post_init__(self) -> None:
        if self.backend not in ("mock", "external"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if not (0.0 <= self.conf_floor <= 1.0):
            raise ValueError(f"conf_floor outside [0,1]: {self.conf_floor}")
        if not (0.0 <= self.nms_iou <= 1.0):
            raise ValueError(f"nms_iou outside [0,1]: {self.nms_iou}")
        if self.input_side <= 0:
            raise ValueError(f"input_side must be positive: {self.input_side}")


@dataclass(frozen=True)
class ExclusionMask:
    """Rectangle in normalized [0,1]^2 image coordinates; detections centered inside are dropped."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.x1 <= self.x2 <= 1.0 and 0.0 <= self.y1 <= self.y2 <= 1.0):
            raise ValueError(f"mask rectangle invalid: {self!r}")

    def contains(self, nx: float, ny: float) -> bool:
        return self.x1 <= nx <= self.x2 and self.y1 <= ny <= self.y2


@dataclass(frozen=True)
class RawInference:
    """Decoded, framework-free model output in the letterbox coordinate frame."""

    detections: tuple[Detection, ...]
    model_id: str
    latency_ms: float = 0.0
    class_names: dict[int, str] = field(default_factory=dict)


class DetectorBackend(Protocol):
    max_concurrency: int | None

    def detect(self, image: ImageRGB, image_id: str) -> RawInference: ...


def postprocess(
    raw: RawInference,
    t: LetterboxTransform,
    cfg: DetectorConfig,
    masks: list[ExclusionMask] | tuple[ExclusionMask, ...] = (),
) -> list[Detection]:
    """Confidence floor, map to source frame, exclusion masks, per-class NMS.

    Output is in source pixels, sorted by descending confidence.
    """
    kept = [d for d in raw.detections if d.confidence >= cfg.conf_floor]
    mapped = [
        Detection(box=map_back(d.box, t), class_id=d.class_id, confidence=d.confidence)
        for d in kept
    ]
    if masks:
        unmasked = []
        for d in mapped:
            cx, cy = d.box.center
            nx, ny = cx / t.src_w, cy / t.src_h
            if not any(m.contains(nx, ny) for m in masks):
                unmasked.append(d)
        mapped = unmasked
    return nms(mapped, cfg.nms_iou)
