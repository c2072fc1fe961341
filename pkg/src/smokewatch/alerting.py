"""Per-camera alarm debouncing and alert dispatch.

Raising uses a k-of-n sliding window over per-frame observations (tolerant
of flickering smoke); clearing requires m consecutive negatives, stricter
because missing an active fire costs more than a late all-clear. A cooldown
after clearance prevents flapping. The machine is pure: ``update`` maps
(state, observation) to (state, events), so identical observation sequences
always yield identical event sequences.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .timefmt import to_iso

__all__ = [
    "AlarmParams",
    "AlarmState",
    "AlertEvent",
    "FrameObservation",
    "OrderingError",
    "AlertNotFoundError",
    "InvalidPhaseError",
    "update",
    "acknowledge",
    "dispatch",
    "event_payload",
    "DeliveryResult",
    "DeliveryError",
    "AlertSink",
    "WebhookSink",
    "LogSink",
    "WEBHOOK_RETRY_DELAYS",
]

WEBHOOK_RETRY_DELAYS = (1.0, 5.0, 25.0)


class OrderingError(ValueError):
    """Observation arrived with a frame_seq at or below the last applied one."""


class AlertNotFoundError(KeyError):
    pass


class InvalidPhaseError(ValueError):
    pass


@dataclass(frozen=True)
class AlarmParams:
    n: int = 5  # window length
    k: int = 3  # positives within the window to raise
    m: int = 10  # consecutive negatives to clear
    cooldown: float = 300.0  # seconds after clearance before the next raise

    def __post_init__(self) -> None:
        if self.n < 1 or self.k < 1 or self.m < 1:
            raise ValueError(f"n, k, m must be >= 1: {self}")
        if self.k > self.n:
            raise ValueError(f"k ({self.k}) cannot exceed n ({self.n})")
        if self.cooldown < 0:
            raise ValueError(f"cooldown must be >= 0: {self.cooldown}")


@dataclass(frozen=True)
class FrameObservation:
    """Digest of one processed frame for the alarm machine."""

    camera_id: str
    frame_seq: int
    at: float
    positive: bool
    max_confidence: float = 0.0
    detection_count: int = 0

    def __post_init__(self) -> None:
        if self.positive and self.detection_count < 1:
            raise ValueError("positive observation requires at least one detection")


@dataclass(frozen=True)
class AlarmState:
    camera_id: str
    phase: str = "idle"  # idle | active | acknowledged | cooldown
    window: tuple[bool, ...] = ()
    last_seq: int = 0
    consecutive_negatives: int = 0
    active_alert_id: str | None = None
    cooldown_until: float | None = None

    def __post_init__(self) -> None:
        has_alert = self.active_alert_id is not None
        if has_alert != (self.phase in ("active", "acknowledged")):
            raise ValueError(f"active_alert_id inconsistent with phase {self.phase!r}")


@dataclass(frozen=True)
class AlertEvent:
    alert_id: str
    camera_id: str
    kind: str  # raised | acknowledged | cleared
    at: float
    frame_seq: int
    max_confidence: float = 0.0
    positives_in_window: int = 0
    window_size: int = 0
    operator: str | None = None


def update(
    state: AlarmState, obs: FrameObservation, params: AlarmParams
) -> tuple[AlarmState, list[AlertEvent]]:
    """Apply one observation; returns the successor state and emitted events."""
    if obs.camera_id != state.camera_id:
        raise ValueError(f"observation for {obs.camera_id!r} applied to {state.camera_id!r}")
    if obs.frame_seq <= state.last_seq:
        raise OrderingError(
            f"frame_seq {obs.frame_seq} not after last seen {state.last_seq} "
            f"for camera {state.camera_id!r}"
        )

    window = (state.window + (obs.positive,))[-params.n :]
    negatives = 0 if obs.positive else state.consecutive_negatives + 1
    state = replace(
        state,
        window=window,
        last_seq=obs.frame_seq,
        consecutive_negatives=negatives,
    )
    events: list[AlertEvent] = []

    if state.phase == "cooldown" and (
        state.cooldown_until is None or obs.at >= state.cooldown_until
    ):
        state = replace(state, phase="idle", cooldown_until=None)

    if state.phase in ("active", "acknowledged"):
        if negatives >= params.m:
            events.append(
                AlertEvent(
                    alert_id=state.active_alert_id,
                    camera_id=state.camera_id,
                    kind="cleared",
                    at=obs.at,
                    frame_seq=obs.frame_seq,
                    max_confidence=obs.max_confidence,
                    positives_in_window=sum(window),
                    window_size=len(window),
                )
            )
            state = replace(
                state,
                phase="cooldown",
                active_alert_id=None,
                cooldown_until=obs.at + params.cooldown,
            )
    elif state.phase == "idle":
        if sum(window) >= params.k:
            alert_id = f"{state.camera_id}:{obs.frame_seq}"
            events.append(
                AlertEvent(
                    alert_id=alert_id,
                    camera_id=state.camera_id,
                    kind="raised",
                    at=obs.at,
                    frame_seq=obs.frame_seq,
                    max_confidence=obs.max_confidence,
                    positives_in_window=sum(window),
                    window_size=len(window),
                )
            )
            state = replace(state, phase="active", active_alert_id=alert_id)

    return state, events


def acknowledge(
    state: AlarmState, alert_id: str, operator: str, at: float | None = None
) -> tuple[AlarmState, AlertEvent]:
    """Operator acknowledges the active alert; suppresses re-notification until cleared."""
    if state.active_alert_id != alert_id:
        raise AlertNotFoundError(alert_id)
    if state.phase != "active":
        raise InvalidPhaseError(f"alert {alert_id!r} is {state.phase}, not active")
    event = AlertEvent(
        alert_id=alert_id,
        camera_id=state.camera_id,
        kind="acknowledged",
        at=at if at is not None else time.time(),
        frame_seq=state.last_seq,
        operator=operator,
    )
    return replace(state, phase="acknowledged"), event


# -- dispatch -----------------------------------------------------------------


def event_payload(event: AlertEvent) -> dict:
    payload = {
        "alert_id": event.alert_id,
        "camera_id": event.camera_id,
        "kind": event.kind,
        "at": to_iso(event.at),
        "max_confidence": event.max_confidence,
        "frame_seq": event.frame_seq,
    }
    if event.operator is not None:
        payload["operator"] = event.operator
    return payload


@dataclass(frozen=True)
class DeliveryResult:
    sink: str
    ok: bool
    attempts: int
    error: str | None = None


class AlertSink(Protocol):
    name: str

    def deliver(self, event: AlertEvent) -> int:
        """Deliver the event, returning the number of attempts made; raises on failure."""
        ...


class WebhookSink:
    """POSTs the event record; retries at 1 s, 5 s, 25 s before giving up."""

    def __init__(
        self,
        url: str,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
        name: str = "webhook",
    ):
        self.name = name
        self.url = url
        self._client = client or httpx.Client(timeout=10.0)
        self._sleep = sleep

    def deliver(self, event: AlertEvent) -> int:
        last_error: Exception | None = None
        attempts = 0
        for delay in (0.0,) + WEBHOOK_RETRY_DELAYS:
            if delay:
                self._sleep(delay)
            attempts += 1
            try:
                resp = self._client.post(self.url, json=event_payload(event))
                if 200 <= resp.status_code < 300:
                    return attempts
                last_error = RuntimeError(f"HTTP {resp.status_code}")
            except httpx.HTTPError as exc:
                last_error = exc
        raise DeliveryError(attempts, f"webhook delivery failed after retries: {last_error}")


class LogSink:
    """Appends event records to an alert log file, one JSON object per line."""

    def __init__(self, path: str | Path, name: str = "log"):
        self.name = name
        self.path = Path(path)

    def deliver(self, event: AlertEvent) -> int:
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event_payload(event)) + "\n")
        return 1


class DeliveryError(RuntimeError):
    def __init__(self, attempts: int, message: str):
        super().__init__(message)
        self.attempts = attempts


def dispatch(event: AlertEvent, sinks: list[AlertSink]) -> list[DeliveryResult]:
    """Attempt every sink independently; one failure never blocks another."""
    results: list[DeliveryResult] = []
    for sink in sinks:
        try:
            attempts = sink.deliver(event)
            results.append(DeliveryResult(sink=sink.name, ok=True, attempts=attempts))
        except Exception as exc:
            attempts = exc.attempts if isinstance(exc, DeliveryError) else 1
            results.append(
                DeliveryResult(sink=sink.name, ok=False, attempts=attempts, error=str(exc))
            )
    return results
