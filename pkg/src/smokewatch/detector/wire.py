"""JSON wire protocol spoken to external model servers (HTTP POST /infer).

Request body::

    { "image_id": str, "width": int, "height": int,
      "pixel_encoding": "png" | "jpeg", "pixels": base64,
      "input_side": int, "conf_floor": float }

Response body::

    { "model_id": str,
      "detections": [ { "x1", "y1", "x2", "y2": letterbox-frame reals,
                        "class_id": int, "class_name": str,
                        "confidence": [0,1] } ],
      "latency_ms": number }

Preprocessing contract the server must apply before inference: letterbox to
``input_side`` (bilinear, pad value 114 per channel), RGB, values scaled to
[0,1], channel-major layout. Returned boxes are in that letterbox frame.
"""

from __future__ import annotations

import base64
import binascii
import json
from dataclasses import dataclass

from ..geometry import BoxXYXY, Detection
from ..images import ImageRGB, encode_image
from .contract import DetectorConfig, ProtocolError, RawInference


@dataclass(frozen=True)
class InferenceRequest:
    image_id: str
    width: int
    height: int
    pixel_encoding: str
    pixels: bytes  # encoded image file bytes, not raw raster
    input_side: int
    conf_floor: float


def encode_request(
    img: ImageRGB, image_id: str, cfg: DetectorConfig, pixel_encoding: str = "jpeg"
) -> bytes:
    """Build and serialize the /infer request for an image."""
    req = InferenceRequest(
        image_id=image_id,
        width=img.width,
        height=img.height,
        pixel_encoding=pixel_encoding,
        pixels=encode_image(img, format=pixel_encoding),
        input_side=cfg.input_side,
        conf_floor=cfg.conf_floor,
    )
    return encode_request_payload(req)


def encode_request_payload(req: InferenceRequest) -> bytes:
    body = {
        "image_id": req.image_id,
        "width": req.width,
        "height": req.height,
        "pixel_encoding": req.pixel_encoding,
        "pixels": base64.b64encode(req.pixels).decode("ascii"),
        "input_side": req.input_side,
        "conf_floor": req.conf_floor,
    }
    return json.dumps(body).encode("utf-8")


def _load_json(data: bytes, what: str) -> dict:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(what, f"not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ProtocolError(what, "top-level value must be an object")
    return obj


def _field(obj: dict, name: str, kind, what: str):
    if name not in obj:
        raise ProtocolError(f"{what}.{name}", "missing required field")
    value = obj[name]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ProtocolError(f"{what}.{name}", f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def decode_request(data: bytes) -> InferenceRequest:
    obj = _load_json(data, "request")
    image_id = _field(obj, "image_id", str, "request")
    width = _field(obj, "width", int, "request")
    height = _field(obj, "height", int, "request")
    if width <= 0 or height <= 0:
        raise ProtocolError("request.width", "dimensions must be positive")
    pixel_encoding = _field(obj, "pixel_encoding", str, "request")
    if pixel_encoding not in ("png", "jpeg"):
        raise ProtocolError("request.pixel_encoding", f"unsupported encoding {pixel_encoding!r}")
    pixels_b64 = _field(obj, "pixels", str, "request")
    try:
        pixels = base64.b64decode(pixels_b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ProtocolError("request.pixels", f"invalid base64: {exc}") from None
    input_side = _field(obj, "input_side", int, "request")
    if input_side <= 0:
        raise ProtocolError("request.input_side", "must be positive")
    conf_floor = _field(obj, "conf_floor", float, "request")
    if not (0.0 <= conf_floor <= 1.0):
        raise ProtocolError("request.conf_floor", "confidence out of range")
    return InferenceRequest(
        image_id=image_id,
        width=width,
        height=height,
        pixel_encoding=pixel_encoding,
        pixels=pixels,
        input_side=input_side,
        conf_floor=conf_floor,
    )


def decode_response(data: bytes) -> RawInference:
    obj = _load_json(data, "response")
    model_id = _field(obj, "model_id", str, "response")
    latency_ms = _field(obj, "latency_ms", float, "response")
    if "detections" not in obj or not isinstance(obj["detections"], list):
        raise ProtocolError("response.detections", "missing or not a list")
    detections: list[Detection] = []
    class_names: dict[int, str] = {}
    for i, rec in enumerate(obj["detections"]):
        what = f"response.detections[{i}]"
        if not isinstance(rec, dict):
            raise ProtocolError(what, "must be an object")
        x1 = _field(rec, "x1", float, what)
        y1 = _field(rec, "y1", float, what)
        x2 = _field(rec, "x2", float, what)
        y2 = _field(rec, "y2", float, what)
        class_id = _field(rec, "class_id", int, what)
        class_name = _field(rec, "class_name", str, what)
        confidence = _field(rec, "confidence", float, what)
        if not (0.0 <= confidence <= 1.0):
            raise ProtocolError(f"{what}.confidence", "confidence out of range")
        if class_id < 0:
            raise ProtocolError(f"{what}.class_id", "must be non-negative")
        try:
            box = BoxXYXY(x1, y1, x2, y2)
        except ValueError as exc:
            raise ProtocolError(f"{what}.x1", str(exc)) from None
        detections.append(Detection(box=box, class_id=class_id, confidence=confidence))
        class_names[class_id] = class_name
    return RawInference(
        detections=tuple(detections),
        model_id=model_id,
        latency_ms=latency_ms,
        class_names=class_names,
    )


def encode_response(raw: RawInference) -> bytes:
    body = {
        "model_id": raw.model_id,
        "detections": [
            {
                "x1": d.box.x1,
                "y1": d.box.y1,
                "x2": d.box.x2,
                "y2": d.box.y2,
                "class_id": d.class_id,
                "class_name": raw.class_names.get(d.class_id, str(d.class_id)),
                "confidence": d.confidence,
            }
            for d in raw.detections
        ],
        "latency_ms": raw.latency_ms,
    }
    return json.dumps(body).encode("utf-8")
