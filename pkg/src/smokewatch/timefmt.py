"""Epoch-seconds <-> ISO-8601 UTC strings used by the log and webhook payloads."""

from __future__ import annotations

from datetime import datetime, timezone


def to_iso(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat().replace("+00:00", "Z")


def from_iso(text: str) -> float:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text).timestamp()
