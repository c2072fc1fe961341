"""Camera registry and still-image polling over HTTP.

All timing flows through an injectable clock so scheduling and backoff are
deterministic under test. One logical polling activity exists per camera;
the registry is single-writer and changes become visible to pollers at the
next scheduler tick.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field, replace
from typing import Protocol

import httpx

from .detector import DEFAULT_CONF_FLOOR, ExclusionMask
from .images import ImageDecodeError, ImageRGB, decode_image

__all__ = [
    "Clock",
    "SystemClock",
    "ManualClock",
    "CameraConfig",
    "Frame",
    "PollStatus",
    "PollFailure",
    "CameraPoller",
    "CameraRegistry",
    "FrameQueue",
    "DuplicateCameraError",
    "UnknownCameraError",
    "scheduler_tick",
    "backoff_delay",
    "decode_image",
]

USER_AGENT = "smokewatch-poller/0.1"
FETCH_TIMEOUT_S = 10.0
MAX_REDIRECTS = 3
MAX_BACKOFF_S = 15 * 60.0

# Fields a PATCH may change; everything else is fixed at registration.
MUTABLE_CAMERA_FIELDS = ("name", "url", "poll_interval", "conf_threshold", "masks", "enabled")


class Clock(Protocol):
    def now(self) -> float: ...


class SystemClock:
    def now(self) -> float:
        return time.time()


class ManualClock:
    """Test clock advanced explicitly."""

    def __init__(self, start: float = 0.0):
        self._now = start

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        self._now += seconds
        return self._now

    def set(self, t: float) -> None:
        self._now = t


class DuplicateCameraError(ValueError):
    pass


class UnknownCameraError(KeyError):
    pass


@dataclass(frozen=True)
class CameraConfig:
    id: str
    url: str
    name: str = ""
    poll_interval: float = 30.0
    conf_threshold: float = DEFAULT_CONF_FLOOR
    masks: tuple[ExclusionMask, ...] = ()
    enabled: bool = True

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("camera id must be non-empty")
        if self.poll_interval < 1.0:
            raise ValueError(f"poll_interval must be >= 1 s, got {self.poll_interval}")
        if not (0.0 <= self.conf_threshold <= 1.0):
            raise ValueError(f"conf_threshold outside [0,1]: {self.conf_threshold}")


@dataclass(frozen=True)
class Frame:
    camera_id: str
    seq: int
    fetched_at: float
    image: ImageRGB


@dataclass
class PollStatus:
    camera_id: str
    state: str = "ok"  # ok | backing_off | disabled
    consecutive_failures: int = 0
    next_attempt: float = 0.0
    last_success: float | None = None
    failure_kind: str | None = None  # network | status | decode
    failure_detail: str | None = None


@dataclass(frozen=True)
class PollFailure:
    camera_id: str
    kind: str
    detail: str
    at: float


def backoff_delay(poll_interval: float, failures: int) -> float:
    return min(poll_interval * (2.0**failures), MAX_BACKOFF_S)


class CameraPoller:
    """Fetches stills for one camera and maintains its poll status."""

    def __init__(self, cam: CameraConfig, clock: Clock, client: httpx.Client | None = None):
        self.cam = cam
        self.clock = clock
        self.status = PollStatus(camera_id=cam.id)
        self._seq = 0
        self._client = client or httpx.Client(
            timeout=FETCH_TIMEOUT_S,
            follow_redirects=True,
            max_redirects=MAX_REDIRECTS,
            headers={"user-agent": USER_AGENT},
        )

    @property
    def last_seq(self) -> int:
        return self._seq

    def resume_from(self, seq: int) -> None:
        """Continue frame numbering after a restart recovered from the log."""
        self._seq = max(self._seq, seq)

    def poll(self) -> Frame | PollFailure:
        now = self.clock.now()
        try:
            resp = self._client.get(self.cam.url)
        except httpx.HTTPError as exc:
            return self._failure("network", str(exc), now)
        if resp.status_code != 200:
            return self._failure("status", f"HTTP {resp.status_code}", now)
        try:
            image = decode_image(resp.content)
        except ImageDecodeError as exc:
            return self._failure("decode", str(exc), now)
        self._seq += 1
        self.status.state = "ok"
        self.status.consecutive_failures = 0
        self.status.last_success = now
        self.status.failure_kind = None
        self.status.failure_detail = None
        self.status.next_attempt = now + self.cam.poll_interval
        return Frame(camera_id=self.cam.id, seq=self._seq, fetched_at=now, image=image)

    def _failure(self, kind: str, detail: str, now: float) -> PollFailure:
        self.status.consecutive_failures += 1
        self.status.state = "backing_off"
        self.status.failure_kind = kind
        self.status.failure_detail = detail
        self.status.next_attempt = now + backoff_delay(
            self.cam.poll_interval, self.status.consecutive_failures
        )
        return PollFailure(camera_id=self.cam.id, kind=kind, detail=detail, at=now)


class CameraRegistry:
    """Camera configs plus their pollers; mutations serialized by one lock."""

    def __init__(self, clock: Clock, client: httpx.Client | None = None):
        self._clock = clock
        self._client = client
        self._lock = threading.Lock()
        self._pollers: dict[str, CameraPoller] = {}
        self._in_flight: set[str] = set()

    def add(self, cam: CameraConfig) -> None:
        with self._lock:
            if cam.id in self._pollers:
                raise DuplicateCameraError(f"camera {cam.id!r} already registered")
            self._pollers[cam.id] = CameraPoller(cam, self._clock, self._client)

    def update(self, camera_id: str, **fields) -> CameraConfig:
        unknown = set(fields) - set(MUTABLE_CAMERA_FIELDS)
        if unknown:
            raise ValueError(f"immutable or unknown camera fields: {sorted(unknown)}")
        with self._lock:
            poller = self._pollers.get(camera_id)
            if poller is None:
                raise UnknownCameraError(camera_id)
            poller.cam = replace(poller.cam, **fields)
            if not poller.cam.enabled:
                poller.status.state = "disabled"
            elif poller.status.state == "disabled":
                poller.status.state = "ok"
            return poller.cam

    def get(self, camera_id: str) -> CameraPoller:
        with self._lock:
            poller = self._pollers.get(camera_id)
            if poller is None:
                raise UnknownCameraError(camera_id)
            return poller

    def __contains__(self, camera_id: str) -> bool:
        with self._lock:
            return camera_id in self._pollers

    def pollers(self) -> list[CameraPoller]:
        with self._lock:
            return [self._pollers[cid] for cid in sorted(self._pollers)]

    def claim(self, camera_id: str) -> bool:
        """Mark a fetch in flight; False when one is already running."""
        with self._lock:
            if camera_id in self._in_flight:
                return False
            self._in_flight.add(camera_id)
            return True

    def release(self, camera_id: str) -> None:
        with self._lock:
            self._in_flight.discard(camera_id)

    def in_flight(self, camera_id: str) -> bool:
        with self._lock:
            return camera_id in self._in_flight


def scheduler_tick(now: float, registry: CameraRegistry) -> list[str]:
    """Enabled cameras due for a fetch (next_attempt <= now), ordered by id."""
    due = []
    for poller in registry.pollers():
        if not poller.cam.enabled:
            continue
        if registry.in_flight(poller.cam.id):
            continue
        if poller.status.next_attempt <= now:
            due.append(poller.cam.id)
    return due


@dataclass
class _QueueEntry:
    frame: Frame


class FrameQueue:
    """Bounded FIFO of frames; overflow drops the oldest frame of the arriving camera."""

    def __init__(self, maxsize: int = 16):
        if maxsize < 1:
            raise ValueError("maxsize must be >= 1")
        self.maxsize = maxsize
        self._items: list[Frame] = []
        self._lock = threading.Lock()
        self.dropped: dict[str, int] = {}

    def put(self, frame: Frame) -> Frame | None:
        """Enqueue; returns the dropped frame when the queue was full."""
        with self._lock:
            dropped = None
            if len(self._items) >= self.maxsize:
                # Prefer dropping this camera's stalest frame; fall back to global oldest.
                idx = next(
                    (i for i, f in enumerate(self._items) if f.camera_id == frame.camera_id), 0
                )
                dropped = self._items.pop(idx)
                self.dropped[dropped.camera_id] = self.dropped.get(dropped.camera_id, 0) + 1
            self._items.append(frame)
            return dropped

    def pop(self) -> Frame | None:
        with self._lock:
            if not self._items:
                return None
            return self._items.pop(0)

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)
