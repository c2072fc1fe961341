"""Service configuration: TOML file with env overrides for host/port/store path."""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .alerting import AlarmParams
from .detector import DetectorConfig, ExclusionMask
from .ingest import CameraConfig

ENV_HOST = "SMOKEWATCH_HOST"
ENV_PORT = "SMOKEWATCH_PORT"
ENV_STORE_PATH = "SMOKEWATCH_STORE_PATH"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8760
    auth_token: str | None = None
    console_dir: str | None = None


@dataclass(frozen=True)
class StoreConfig:
    log_path: str = "events.log"
    snapshot_path: str | None = "snapshot.json"
    frames_dir: str = "frames"
    fsync: bool = True


@dataclass(frozen=True)
class AlertingConfig:
    params: AlarmParams = field(default_factory=AlarmParams)
    webhook_url: str | None = None
    alert_log: str | None = None


@dataclass(frozen=True)
class AppConfig:
    server: ServerConfig = field(default_factory=ServerConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    alerting: AlertingConfig = field(default_factory=AlertingConfig)
    store: StoreConfig = field(default_factory=StoreConfig)
    cameras: tuple[CameraConfig, ...] = ()


def parse_masks(raw: list) -> tuple[ExclusionMask, ...]:
    masks = []
    for i, entry in enumerate(raw):
        if isinstance(entry, dict):
            entry = [entry.get("x1"), entry.get("y1"), entry.get("x2"), entry.get("y2")]
        if not isinstance(entry, (list, tuple)) or len(entry) != 4:
            raise ConfigError(f"mask #{i}: expected four numbers [x1, y1, x2, y2]")
        masks.append(ExclusionMask(*[float(v) for v in entry]))
    return tuple(masks)


def _camera_from_table(table: dict, index: int) -> CameraConfig:
    try:
        return CameraConfig(
            id=table["id"],
            url=table["url"],
            name=table.get("name", table["id"]),
            poll_interval=float(table.get("poll_interval", 30.0)),
            conf_threshold=float(table.get("conf_threshold", 0.298)),
            masks=parse_masks(table.get("masks", [])),
            enabled=bool(table.get("enabled", True)),
        )
    except KeyError as exc:
        raise ConfigError(f"camera #{index}: missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(f"camera #{index}: {exc}") from None


def load_config(path: str | Path, env: dict[str, str] | None = None) -> AppConfig:
    """Parse the TOML config file and apply environment overrides."""
    path = Path(path)
    env = env if env is not None else dict(os.environ)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc

    server_t = raw.get("server", {})
    server = ServerConfig(
        host=env.get(ENV_HOST) or server_t.get("host", "127.0.0.1"),
        port=int(env.get(ENV_PORT) or server_t.get("port", 8760)),
        auth_token=server_t.get("auth_token") or None,
        console_dir=server_t.get("console_dir") or None,
    )

    det_t = raw.get("detector", {})
    try:
        detector = DetectorConfig(
            backend=det_t.get("backend", "mock"),
            endpoint=det_t.get("endpoint") or None,
            fixture_path=det_t.get("fixture_path") or None,
            input_side=int(det_t.get("input_side", 640)),
            conf_floor=float(det_t.get("conf_floor", 0.298)),
            nms_iou=float(det_t.get("nms_iou", 0.45)),
            timeout_s=float(det_t.get("timeout_s", 10.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"detector: {exc}") from None

    alert_t = raw.get("alerting", {})
    try:
        params = AlarmParams(
            n=int(alert_t.get("n", 5)),
            k=int(alert_t.get("k", 3)),
            m=int(alert_t.get("m", 10)),
            cooldown=float(alert_t.get("cooldown", 300.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"alerting: {exc}") from None
    alerting = AlertingConfig(
        params=params,
        webhook_url=alert_t.get("webhook_url") or None,
        alert_log=alert_t.get("alert_log") or None,
    )

    store_t = raw.get("store", {})
    store = StoreConfig(
        log_path=env.get(ENV_STORE_PATH) or store_t.get("log_path", "events.log"),
        snapshot_path=store_t.get("snapshot_path", "snapshot.json") or None,
        frames_dir=store_t.get("frames_dir", "frames"),
        fsync=bool(store_t.get("fsync", True)),
    )

    cameras = tuple(
        _camera_from_table(t, i) for i, t in enumerate(raw.get("camera", []))
    )
    seen = set()
    for cam in cameras:
        if cam.id in seen:
            raise ConfigError(f"duplicate camera id {cam.id!r}")
        seen.add(cam.id)

    return AppConfig(
        server=server, detector=detector, alerting=alerting, store=store, cameras=cameras
    )
