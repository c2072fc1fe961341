"""Detector backends: the scripted mock and the external HTTP client."""

from __future__ import annotations

import json
from pathlib import Path

import httpx

from ..geometry import BoxXYXY, Detection, letterbox_plan, map_forward
from ..images import ImageRGB
from .contract import BackendError, DetectorConfig, RawInference
from .wire import decode_response, encode_request


class MockBackend:
    """Deterministic backend replaying detections from a fixture file.

    Fixture format: JSON lines, one record per image id::

        { "image_id": str, "frame": "source" | "letterbox",
          "model_id"?: str,
          "detections": [ { "x1","y1","x2","y2","class_id","confidence",
                            "class_name"? } ] }

    Source-frame records are mapped into the letterbox frame at detect()
    time so callers always see letterbox coordinates. Unknown image ids
    produce an empty inference. Fully safe for concurrent calls.
    """

    max_concurrency: int | None = None

    def __init__(self, fixture_path: str | Path | None, input_side: int = 640):
        self.input_side = input_side
        self._entries: dict[str, dict] = {}
        if fixture_path is not None:
            self._load(Path(fixture_path))

    def _load(self, path: Path) -> None:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise BackendError(f"cannot read mock fixture {path}: {exc}") from exc
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                image_id = rec["image_id"]
                frame = rec.get("frame", "letterbox")
                if frame not in ("source", "letterbox"):
                    raise ValueError(f"unknown frame {frame!r}")
                rec["detections"] = [
                    {
                        "box": BoxXYXY(
                            float(d["x1"]), float(d["y1"]), float(d["x2"]), float(d["y2"])
                        ),
                        "class_id": int(d["class_id"]),
                        "confidence": float(d["confidence"]),
                        "class_name": d.get("class_name", "smoke"),
                    }
                    for d in rec.get("detections", [])
                ]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise BackendError(f"mock fixture {path}:{line_no}: {exc}") from None
            self._entries[image_id] = rec

    def detect(self, image: ImageRGB, image_id: str) -> RawInference:
        entry = self._entries.get(image_id)
        if entry is None:
            return RawInference(detections=(), model_id="mock", latency_ms=0.0)
        t = letterbox_plan(image.width, image.height, self.input_side)
        detections = []
        class_names: dict[int, str] = {}
        for d in entry["detections"]:
            box = d["box"]
            if entry.get("frame", "letterbox") == "source":
                box = map_forward(box, t)
            detections.append(
                Detection(box=box, class_id=d["class_id"], confidence=d["confidence"])
            )
            class_names[d["class_id"]] = d["class_name"]
        return RawInference(
            detections=tuple(detections),
            model_id=entry.get("model_id", "mock"),
            latency_ms=0.0,
            class_names=class_names,
        )


class ExternalBackend:
    """HTTP client for an external model server speaking the wire protocol."""

    max_concurrency: int | None = None

    def __init__(self, cfg: DetectorConfig, client: httpx.Client | None = None):
        if not cfg.endpoint:
            raise ValueError("external backend requires an endpoint URL")
        self.cfg = cfg
        self._url = cfg.endpoint.rstrip("/")
        if not self._url.endswith("/infer"):
            self._url += "/infer"
        self._client = client or httpx.Client(timeout=cfg.timeout_s)

    def detect(self, image: ImageRGB, image_id: str) -> RawInference:
        body = encode_request(image, image_id, self.cfg)
        try:
            resp = self._client.post(
                self._url, content=body, headers={"content-type": "application/json"}
            )
        except httpx.HTTPError as exc:
            raise BackendError(f"inference endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"inference endpoint returned HTTP {resp.status_code}")
        return decode_response(resp.content)

    def close(self) -> None:
        self._client.close()


def build_backend(cfg: DetectorConfig, client: httpx.Client | None = None):
    if cfg.backend == "mock":
        return MockBackend(cfg.fixture_path, input_side=cfg.input_side)
    return ExternalBackend(cfg, client=client)
