"""Durable, replayable persistence: append-only event log plus snapshots.

One record per line: ``seq <TAB> iso-timestamp <TAB> kind <TAB> crc32 <TAB>
payload-json``. Replay folds records through the same pure alarm machine the
live pipeline uses, so a replayed state equals the live one field for field.
A torn final line (crash mid-write) is truncated with a warning; corruption
anywhere else is an integrity error.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from .alerting import (
    AlarmParams,
    AlarmState,
    AlertEvent,
    FrameObservation,
    acknowledge,
    update,
)
from .timefmt import from_iso, to_iso

__all__ = [
    "RECORD_KINDS",
    "LogRecord",
    "EventLog",
    "IntegrityError",
    "MaterializedState",
    "read_records",
    "replay",
    "apply_record",
    "apply_alert_event",
    "Snapshot",
    "save_snapshot",
    "load_snapshot",
    "load_state",
]

logger = logging.getLogger(__name__)

RECORD_KINDS = ("detection", "alert", "camera_config", "ack", "poll_status")


class IntegrityError(Exception):
    """Mid-log corruption; carries the sequence number of the bad record."""

    def __init__(self, seq: int, message: str):
        super().__init__(f"record {seq}: {message}")
        self.seq = seq


@dataclass(frozen=True)
class LogRecord:
    seq: int
    at: float
    kind: str
    payload: dict


def _checksum(seq: int, iso: str, kind: str, payload_json: str) -> str:
    return format(zlib.crc32(f"{seq}\t{iso}\t{kind}\t{payload_json}".encode("utf-8")), "08x")


def _format_record(rec: LogRecord) -> str:
    iso = to_iso(rec.at)
    payload_json = json.dumps(rec.payload, separators=(",", ":"))
    return f"{rec.seq}\t{iso}\t{rec.kind}\t{_checksum(rec.seq, iso, rec.kind, payload_json)}\t{payload_json}\n"


def _parse_line(line: str) -> LogRecord:
    parts = line.rstrip("\n").split("\t", 4)
    if len(parts) != 5:
        raise ValueError(f"expected 5 tab-separated fields, got {len(parts)}")
    seq_s, iso, kind, checksum, payload_json = parts
    seq = int(seq_s)
    if kind not in RECORD_KINDS:
        raise ValueError(f"unknown record kind {kind!r}")
    if _checksum(seq, iso, kind, payload_json) != checksum:
        raise ValueError("checksum mismatch")
    return LogRecord(seq=seq, at=from_iso(iso), kind=kind, payload=json.loads(payload_json))


def read_records(path: str | Path) -> tuple[list[LogRecord], bool]:
    """Parse the log; returns (records, tail_truncated).

    A final line that is unparseable or lacks its newline is treated as a
    torn write and dropped with a warning; a bad record anywhere earlier
    raises IntegrityError with its expected sequence number.
    """
    path = Path(path)
    if not path.exists():
        return [], False
    data = path.read_text(encoding="utf-8")
    if not data:
        return [], False
    lines = data.split("\n")
    incomplete_tail = lines[-1] != ""
    if not incomplete_tail:
        lines = lines[:-1]
    records: list[LogRecord] = []
    for i, line in enumerate(lines):
        is_last = i == len(lines) - 1
        expected_seq = records[-1].seq + 1 if records else 1
        try:
            rec = _parse_line(line)
            if rec.seq != expected_seq:
                raise ValueError(f"sequence gap: got {rec.seq}, expected {expected_seq}")
        except (ValueError, json.JSONDecodeError) as exc:
            if is_last:
                logger.warning("dropping torn final log record (seq %d): %s", expected_seq, exc)
                return records, True
            raise IntegrityError(expected_seq, str(exc)) from None
        if is_last and incomplete_tail:
            logger.warning("dropping final log record without newline (seq %d)", rec.seq)
            return records, True
        records.append(rec)
    return records, False


class EventLog:
    """Single-writer append-only log; appends are flushed before seq is returned."""

    def __init__(self, path: str | Path, fsync: bool = True):
        self.path = Path(path)
        self.fsync = fsync
        self._lock = threading.Lock()
        records, truncated = read_records(self.path)
        self._last_seq = records[-1].seq if records else 0
        if truncated:
            # Rewrite without the torn tail so future readers see a clean log.
            with self.path.open("w", encoding="utf-8") as fh:
                for rec in records:
                    fh.write(_format_record(rec))
        self._fh = self.path.open("a", encoding="utf-8")

    @property
    def last_seq(self) -> int:
        return self._last_seq

    def append(self, kind: str, payload: dict, at: float) -> LogRecord:
        if kind not in RECORD_KINDS:
            raise ValueError(f"unknown record kind {kind!r}")
        with self._lock:
            rec = LogRecord(seq=self._last_seq + 1, at=at, kind=kind, payload=payload)
            self._fh.write(_format_record(rec))
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())
            self._last_seq = rec.seq
            return rec

    def records(self) -> list[LogRecord]:
        with self._lock:
            self._fh.flush()
        return read_records(self.path)[0]

    def close(self) -> None:
        with self._lock:
            self._fh.close()


# -- materialized state --------------------------------------------------------


@dataclass
class MaterializedState:
    as_of_seq: int = 0
    cameras: dict[str, dict] = field(default_factory=dict)
    alarms: dict[str, AlarmState] = field(default_factory=dict)
    active_alerts: dict[str, dict] = field(default_factory=dict)
    poll_status: dict[str, dict] = field(default_factory=dict)
    latest_detection: dict[str, dict] = field(default_factory=dict)


def apply_alert_event(active_alerts: dict[str, dict], event: AlertEvent) -> None:
    """Shared bookkeeping for the active-alert table (live pipeline and replay)."""
    if event.kind == "raised":
        active_alerts[event.alert_id] = {
            "alert_id": event.alert_id,
            "camera_id": event.camera_id,
            "state": "active",
            "raised_at": event.at,
            "frame_seq": event.frame_seq,
            "max_confidence": event.max_confidence,
            "positives_in_window": event.positives_in_window,
            "window_size": event.window_size,
        }
    elif event.kind == "acknowledged":
        entry = active_alerts.get(event.alert_id)
        if entry is not None:
            entry["state"] = "acknowledged"
            entry["operator"] = event.operator
            entry["acknowledged_at"] = event.at
    elif event.kind == "cleared":
        active_alerts.pop(event.alert_id, None)


def apply_record(
    state: MaterializedState, rec: LogRecord, params: AlarmParams
) -> list[AlertEvent]:
    """Fold one record into the state; returns alarm events the fold derived.

    The live pipeline and replay share this function, so replayed state
    matches live state field for field. Alert events come out of the fold
    (not out of "alert" records) for both.
    """
    p = rec.payload
    events: list[AlertEvent] = []
    if rec.kind == "camera_config":
        cam = p["camera"]
        state.cameras[cam["id"]] = cam
        state.alarms.setdefault(cam["id"], AlarmState(camera_id=cam["id"]))
    elif rec.kind == "detection":
        camera_id = p["camera_id"]
        obs = FrameObservation(
            camera_id=camera_id,
            frame_seq=p["frame_seq"],
            at=p["at"],
            positive=p["positive"],
            max_confidence=p["max_confidence"],
            detection_count=p["detection_count"],
        )
        alarm = state.alarms.setdefault(camera_id, AlarmState(camera_id=camera_id))
        alarm, events = update(alarm, obs, params)
        state.alarms[camera_id] = alarm
        state.latest_detection[camera_id] = p
        for event in events:
            apply_alert_event(state.active_alerts, event)
    elif rec.kind == "ack":
        camera_id = p["camera_id"]
        alarm = state.alarms[camera_id]
        alarm, event = acknowledge(alarm, p["alert_id"], p["operator"], at=p["at"])
        state.alarms[camera_id] = alarm
        apply_alert_event(state.active_alerts, event)
        events = [event]
    elif rec.kind == "poll_status":
        state.poll_status[p["camera_id"]] = p
    elif rec.kind == "alert":
        # Alert records are audit/stream data; state transitions are re-derived
        # from the detection/ack folds above.
        pass
    state.as_of_seq = rec.seq
    return events


def replay(
    records: list[LogRecord], params: AlarmParams, onto: MaterializedState | None = None
) -> MaterializedState:
    state = onto if onto is not None else MaterializedState()
    for rec in records:
        if rec.seq <= state.as_of_seq:
            raise IntegrityError(rec.seq, f"record at or before snapshot seq {state.as_of_seq}")
        apply_record(state, rec, params)
    return state


# -- snapshots -------------------------------------------------------------------


@dataclass(frozen=True)
class Snapshot:
    as_of_seq: int
    cameras: dict[str, dict]
    alarms: dict[str, dict]
    active_alerts: dict[str, dict]
    poll_status: dict[str, dict]
    latest_detection: dict[str, dict]


def _alarm_to_dict(alarm: AlarmState) -> dict:
    return {
        "camera_id": alarm.camera_id,
        "phase": alarm.phase,
        "window": list(alarm.window),
        "last_seq": alarm.last_seq,
        "consecutive_negatives": alarm.consecutive_negatives,
        "active_alert_id": alarm.active_alert_id,
        "cooldown_until": alarm.cooldown_until,
    }


def _alarm_from_dict(d: dict) -> AlarmState:
    return AlarmState(
        camera_id=d["camera_id"],
        phase=d["phase"],
        window=tuple(d["window"]),
        last_seq=d["last_seq"],
        consecutive_negatives=d["consecutive_negatives"],
        active_alert_id=d["active_alert_id"],
        cooldown_until=d["cooldown_until"],
    )


def save_snapshot(state: MaterializedState, path: str | Path) -> Snapshot:
    snap = Snapshot(
        as_of_seq=state.as_of_seq,
        cameras=state.cameras,
        alarms={cid: _alarm_to_dict(a) for cid, a in state.alarms.items()},
        active_alerts=state.active_alerts,
        poll_status=state.poll_status,
        latest_detection=state.latest_detection,
    )
    Path(path).write_text(
        json.dumps(
            {
                "as_of_seq": snap.as_of_seq,
                "cameras": snap.cameras,
                "alarms": snap.alarms,
                "active_alerts": snap.active_alerts,
                "poll_status": snap.poll_status,
                "latest_detection": snap.latest_detection,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return snap


def load_snapshot(path: str | Path) -> MaterializedState:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    return MaterializedState(
        as_of_seq=d["as_of_seq"],
        cameras=d["cameras"],
        alarms={cid: _alarm_from_dict(a) for cid, a in d["alarms"].items()},
        active_alerts=d["active_alerts"],
        poll_status=d["poll_status"],
        latest_detection=d["latest_detection"],
    )


def load_state(
    snapshot_path: str | Path | None, log_path: str | Path, params: AlarmParams
) -> MaterializedState:
    """Snapshot plus tail replay; equals a full replay of the log."""
    records, _ = read_records(log_path)
    if snapshot_path is not None and Path(snapshot_path).exists():
        state = load_snapshot(snapshot_path)
        last_seq = records[-1].seq if records else 0
        if state.as_of_seq > last_seq:
            raise IntegrityError(
                state.as_of_seq, f"snapshot is ahead of the log (last seq {last_seq})"
            )
        tail = [r for r in records if r.seq > state.as_of_seq]
        return replay(tail, params, onto=state)
    return replay(records, params)
