"""Wildfire-smoke early-warning toolkit and service."""

__version__ = "0.1.0"

from .geometry import (
    BoxXYXY,
    Detection,
    LetterboxTransform,
    YoloBox,
    iou,
    letterbox_plan,
    map_back,
    map_forward,
    nms,
    xyxy_to_yolo,
    yolo_to_xyxy,
)
from .images import ImageRGB, decode_image, encode_image

__all__ = [
    "BoxXYXY",
    "Detection",
    "LetterboxTransform",
    "YoloBox",
    "iou",
    "letterbox_plan",
    "map_back",
    "map_forward",
    "nms",
    "xyxy_to_yolo",
    "yolo_to_xyxy",
    "ImageRGB",
    "decode_image",
    "encode_image",
    "__version__",
]
