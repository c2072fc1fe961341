"""Runtime orchestrator: polling, detection, alarm updates, persistence, dispatch.

The service is an event-sourced core: every mutation is appended to the
event log first and then folded into in-memory state through the same
``apply_record`` used by replay, so a restart (or a test replaying the log)
reproduces live state field for field. All state mutation happens under one
lock in log order; fetching and inference run outside it.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import asdict
from pathlib import Path
from typing import Callable

import httpx

from .alerting import (
    AlertEvent,
    AlertNotFoundError,
    AlertSink,
    InvalidPhaseError,
    LogSink,
    WebhookSink,
    acknowledge,
    dispatch,
)
from .config import AppConfig
from .detector import DetectorConfig, ExclusionMask, build_backend, postprocess
from .geometry import Detection, letterbox_plan
from .images import ImageRGB, decode_image, encode_image
from .ingest import (
    CameraConfig,
    CameraRegistry,
    Clock,
    Frame,
    FrameQueue,
    PollFailure,
    SystemClock,
    scheduler_tick,
)
from .store import (
    EventLog,
    LogRecord,
    MaterializedState,
    apply_record,
    load_state,
    save_snapshot,
)

logger = logging.getLogger(__name__)

LATENCY_STAGES = ("poll", "infer", "postprocess")


def camera_to_payload(cam: CameraConfig) -> dict:
    payload = asdict(cam)
    payload["masks"] = [[m.x1, m.y1, m.x2, m.y2] for m in cam.masks]
    return payload


def camera_from_payload(payload: dict) -> CameraConfig:
    masks = tuple(ExclusionMask(*m) for m in payload.get("masks", []))
    return CameraConfig(
        id=payload["id"],
        url=payload["url"],
        name=payload.get("name", payload["id"]),
        poll_interval=float(payload.get("poll_interval", 30.0)),
        conf_threshold=float(payload.get("conf_threshold", 0.298)),
        masks=masks,
        enabled=bool(payload.get("enabled", True)),
    )


def detection_to_dict(det: Detection) -> dict:
    return {
        "x1": det.box.x1,
        "y1": det.box.y1,
        "x2": det.box.x2,
        "y2": det.box.y2,
        "class_id": det.class_id,
        "confidence": det.confidence,
    }


class Metrics:
    """Monotone operational counters plus per-stage latency accumulators."""

    def __init__(self):
        self._lock = threading.Lock()
        self.counters: dict[str, int] = {
            "frames_polled": 0,
            "poll_failures": 0,
            "frames_dropped": 0,
            "detections_total": 0,
            "alerts_raised": 0,
            "alerts_acknowledged": 0,
            "alerts_cleared": 0,
            "sink_failures": 0,
            "detect_requests": 0,
        }
        for stage in LATENCY_STAGES:
            self.counters[f"latency_{stage}_ms_total"] = 0
            self.counters[f"latency_{stage}_count"] = 0

    def inc(self, name: str, amount: int = 1) -> None:
        with self._lock:
            self.counters[name] = self.counters.get(name, 0) + amount

    def observe_latency(self, stage: str, ms: float) -> None:
        with self._lock:
            self.counters[f"latency_{stage}_ms_total"] += int(ms)
            self.counters[f"latency_{stage}_count"] += 1

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self.counters)


class SmokewatchService:
    """Single-writer pipeline core shared by the HTTP API and the poll loop."""

    def __init__(
        self,
        config: AppConfig,
        clock: Clock | None = None,
        camera_client: httpx.Client | None = None,
        webhook_client: httpx.Client | None = None,
        backend=None,
        webhook_sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self.clock = clock or SystemClock()
        self.params = config.alerting.params
        self.detector_cfg: DetectorConfig = config.detector
        self.backend = backend if backend is not None else build_backend(config.detector)

        log_path = Path(config.store.log_path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        self.state: MaterializedState = load_state(
            config.store.snapshot_path, log_path, self.params
        )
        self.log = EventLog(log_path, fsync=config.store.fsync)

        self.frames_dir = Path(config.store.frames_dir)
        self.frames_dir.mkdir(parents=True, exist_ok=True)

        self.registry = CameraRegistry(self.clock, camera_client)
        self.queue = FrameQueue(maxsize=64)
        self.metrics = Metrics()
        self._lock = threading.RLock()
        self._listeners: list[Callable[[LogRecord], None]] = []
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        # Detector backends may cap concurrent detect() calls.
        limit = getattr(self.backend, "max_concurrency", None)
        self._detect_slot = threading.Semaphore(limit) if limit else None

        self.sinks: list[AlertSink] = []
        if config.alerting.webhook_url:
            self.sinks.append(
                WebhookSink(
                    config.alerting.webhook_url, client=webhook_client, sleep=webhook_sleep
                )
            )
        if config.alerting.alert_log:
            self.sinks.append(LogSink(config.alerting.alert_log))

        self._restore_cameras()
        for cam in config.cameras:
            if cam.id not in self.registry:
                self.add_camera(cam)

    # -- recovery and registry -------------------------------------------------

    def _restore_cameras(self) -> None:
        for camera_id in sorted(self.state.cameras):
            cam = camera_from_payload(self.state.cameras[camera_id])
            self.registry.add(cam)
            # Frame numbering continues where the log left off.
            alarm = self.state.alarms.get(camera_id)
            if alarm is not None:
                self.registry.get(camera_id).resume_from(alarm.last_seq)

    def subscribe(self, listener: Callable[[LogRecord], None]) -> None:
        self._listeners.append(listener)

    def unsubscribe(self, listener: Callable[[LogRecord], None]) -> None:
        if listener in self._listeners:
            self._listeners.remove(listener)

    def _append(self, kind: str, payload: dict) -> tuple[LogRecord, list[AlertEvent]]:
        """Log a record, fold it into state, and fan out to stream listeners."""
        rec = self.log.append(kind, payload, at=self.clock.now())
        events = apply_record(self.state, rec, self.params)
        for listener in list(self._listeners):
            try:
                listener(rec)
            except Exception:
                logger.exception("event listener failed")
        return rec, events

    def add_camera(self, cam: CameraConfig) -> CameraConfig:
        with self._lock:
            self.registry.add(cam)
            self._append("camera_config", {"action": "add", "camera": camera_to_payload(cam)})
            return cam

    def update_camera(self, camera_id: str, **fields) -> CameraConfig:
        with self._lock:
            cam = self.registry.update(camera_id, **fields)
            self._append(
                "camera_config", {"action": "update", "camera": camera_to_payload(cam)}
            )
            return cam

    def cameras_view(self) -> list[dict]:
        with self._lock:
            out = []
            for poller in self.registry.pollers():
                alarm = self.state.alarms.get(poller.cam.id)
                status = poller.status
                out.append(
                    {
                        "camera": camera_to_payload(poller.cam),
                        "poll_status": {
                            "state": status.state,
                            "consecutive_failures": status.consecutive_failures,
                            "next_attempt": status.next_attempt,
                            "last_success": status.last_success,
                            "failure_kind": status.failure_kind,
                        },
                        "phase": alarm.phase if alarm else "idle",
                    }
                )
            return out

    # -- pipeline ----------------------------------------------------------------

    def process_once(self, now: float | None = None) -> int:
        """Poll due cameras and run their frames through the pipeline; returns frames handled."""
        now = now if now is not None else self.clock.now()
        handled = 0
        for camera_id in scheduler_tick(now, self.registry):
            if not self.registry.claim(camera_id):
                continue
            try:
                poller = self.registry.get(camera_id)
                was_failing = poller.status.consecutive_failures > 0
                started = time.monotonic()
                result = poller.poll()
                self.metrics.observe_latency("poll", (time.monotonic() - started) * 1000)
                if isinstance(result, PollFailure):
                    self.metrics.inc("poll_failures")
                    self._record_poll_status(poller)
                    continue
                self.metrics.inc("frames_polled")
                if was_failing:
                    self._record_poll_status(poller)  # recovery transition
                dropped = self.queue.put(result)
                if dropped is not None:
                    self.metrics.inc("frames_dropped")
            finally:
                self.registry.release(camera_id)
        while True:
            frame = self.queue.pop()
            if frame is None:
                break
            self._process_frame(frame)
            handled += 1
        return handled

    def _record_poll_status(self, poller) -> None:
        status = poller.status
        with self._lock:
            self._append(
                "poll_status",
                {
                    "camera_id": poller.cam.id,
                    "state": status.state,
                    "consecutive_failures": status.consecutive_failures,
                    "next_attempt": status.next_attempt,
                    "failure_kind": status.failure_kind,
                    "failure_detail": status.failure_detail,
                },
            )

    def _process_frame(self, frame: Frame) -> None:
        poller = self.registry.get(frame.camera_id)
        cam = poller.cam
        image_id = f"{cam.id}/{frame.seq:06d}"

        started = time.monotonic()
        if self._detect_slot is not None:
            with self._detect_slot:
                raw = self.backend.detect(frame.image, image_id)
        else:
            raw = self.backend.detect(frame.image, image_id)
        self.metrics.observe_latency("infer", (time.monotonic() - started) * 1000)

        started = time.monotonic()
        t = letterbox_plan(frame.image.width, frame.image.height, self.detector_cfg.input_side)
        detections = postprocess(raw, t, self.detector_cfg, cam.masks)
        self.metrics.observe_latency("postprocess", (time.monotonic() - started) * 1000)

        self.metrics.inc("detections_total", len(detections))
        over_threshold = [d for d in detections if d.confidence >= cam.conf_threshold]
        positive = bool(over_threshold)
        max_confidence = max((d.confidence for d in detections), default=0.0)

        self._write_latest_frame(cam.id, frame.image)

        payload = {
            "camera_id": cam.id,
            "frame_seq": frame.seq,
            "at": frame.fetched_at,
            "image_id": image_id,
            "positive": positive,
            "max_confidence": max_confidence,
            "detection_count": len(detections),
            "detections": [detection_to_dict(d) for d in detections],
            "model_id": raw.model_id,
        }
        with self._lock:
            _, events = self._append("detection", payload)
            for event in events:
                self._emit_alert_event(event)

    def _emit_alert_event(self, event: AlertEvent) -> None:
        self._append(
            "alert",
            {
                "alert_id": event.alert_id,
                "camera_id": event.camera_id,
                "kind": event.kind,
                "at": event.at,
                "frame_seq": event.frame_seq,
                "max_confidence": event.max_confidence,
                "positives_in_window": event.positives_in_window,
                "window_size": event.window_size,
                "operator": event.operator,
            },
        )
        self.metrics.inc(f"alerts_{event.kind}")
        for result in dispatch(event, self.sinks):
            if not result.ok:
                self.metrics.inc("sink_failures")
                logger.warning(
                    "alert sink %s failed after %d attempts: %s",
                    result.sink,
                    result.attempts,
                    result.error,
                )

    def _write_latest_frame(self, camera_id: str, image: ImageRGB) -> None:
        path = self.frames_dir / f"{camera_id}.jpg"
        path.write_bytes(encode_image(image, format="jpeg"))

    # -- operator actions ----------------------------------------------------------

    def ack_alert(self, alert_id: str, operator: str) -> dict:
        with self._lock:
            entry = self.state.active_alerts.get(alert_id)
            if entry is None:
                raise AlertNotFoundError(alert_id)
            alarm = self.state.alarms[entry["camera_id"]]
            # Validate against the live machine before writing the record;
            # the log must never contain an unreplayable ack.
            _, event = acknowledge(alarm, alert_id, operator, at=self.clock.now())
            self._append(
                "ack",
                {
                    "alert_id": alert_id,
                    "camera_id": entry["camera_id"],
                    "operator": operator,
                    "at": event.at,
                },
            )
            self.metrics.inc("alerts_acknowledged")
            for result in dispatch(event, self.sinks):
                if not result.ok:
                    self.metrics.inc("sink_failures")
            return dict(self.state.active_alerts[alert_id])

    def active_alerts_view(self) -> list[dict]:
        with self._lock:
            return [dict(v) for v in self.state.active_alerts.values()]

    def all_alerts_view(self) -> list[dict]:
        """Every alert ever raised, with its latest lifecycle state, from the log."""
        alerts: dict[str, dict] = {}
        for rec in self.log.records():
            if rec.kind == "alert":
                p = rec.payload
                if p["kind"] == "raised":
                    alerts[p["alert_id"]] = {
                        "alert_id": p["alert_id"],
                        "camera_id": p["camera_id"],
                        "state": "active",
                        "raised_at": p["at"],
                        "frame_seq": p["frame_seq"],
                        "max_confidence": p["max_confidence"],
                    }
                elif p["alert_id"] in alerts:
                    alerts[p["alert_id"]]["state"] = (
                        "cleared" if p["kind"] == "cleared" else p["kind"]
                    )
            elif rec.kind == "ack" and rec.payload["alert_id"] in alerts:
                entry = alerts[rec.payload["alert_id"]]
                entry["state"] = "acknowledged"
                entry["operator"] = rec.payload["operator"]
        return list(alerts.values())

    def latest_view(self, camera_id: str) -> dict | None:
        with self._lock:
            return self.state.latest_detection.get(camera_id)

    def detect_once(self, data: bytes, image_id: str = "upload") -> dict:
        """One-shot detection on an uploaded image with default post-processing."""
        self.metrics.inc("detect_requests")
        image = decode_image(data)
        raw = self.backend.detect(image, image_id)
        t = letterbox_plan(image.width, image.height, self.detector_cfg.input_side)
        detections = postprocess(raw, t, self.detector_cfg, ())
        return {
            "image_id": image_id,
            "model_id": raw.model_id,
            "latency_ms": raw.latency_ms,
            "width": image.width,
            "height": image.height,
            "detections": [detection_to_dict(d) for d in detections],
        }

    def write_snapshot(self) -> None:
        if not self.config.store.snapshot_path:
            return
        with self._lock:
            save_snapshot(self.state, self.config.store.snapshot_path)

    # -- background loop -------------------------------------------------------------

    def start(self, tick_s: float = 0.5) -> None:
        if self._thread is not None:
            return
        self._stop.clear()

        def loop():
            while not self._stop.is_set():
                try:
                    self.process_once(self.clock.now())
                except Exception:
                    logger.exception("pipeline iteration failed")
                self._stop.wait(tick_s)

        self._thread = threading.Thread(target=loop, name="smokewatch-pipeline", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None
        self.write_snapshot()
        self.log.close()
