"""HTTP control/observation plane over the service core.

Every mutating endpoint is a thin shell over a logged command, and the
event stream replays the log itself, so anything visible through the API
is also in the store. Server-push uses long-lived HTTP streaming (SSE
format) with sequence-number resume; no broker dependency.
"""

from __future__ import annotations

import json
import queue
from pathlib import Path

from fastapi import Body, FastAPI, Query, Request, Response
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from starlette.concurrency import run_in_threadpool

from .alerting import AlertNotFoundError, InvalidPhaseError
from .detector import BackendError
from .images import ImageDecodeError
from .ingest import DuplicateCameraError, UnknownCameraError
from .service import SmokewatchService
from .store import LogRecord
from .timefmt import to_iso

MAX_UPLOAD_BYTES = 20 * 1024 * 1024
STREAM_KEEPALIVE_S = 15.0

PATCHABLE_FIELDS = ("name", "url", "poll_interval", "conf_threshold", "masks", "enabled")


class ApiError(Exception):
    """Stable machine-readable API error: HTTP status + error code + message."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _record_to_stream_json(rec: LogRecord) -> str:
    return json.dumps(
        {"seq": rec.seq, "at": to_iso(rec.at), "kind": rec.kind, "payload": rec.payload}
    )


def _sse(rec: LogRecord) -> str:
    return f"id: {rec.seq}\ndata: {_record_to_stream_json(rec)}\n\n"


def create_app(service: SmokewatchService) -> FastAPI:
    app = FastAPI(title="smokewatch", version="0.1.0", docs_url=None, redoc_url=None)
    auth_token = service.config.server.auth_token

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    if auth_token:

        @app.middleware("http")
        async def check_token(request: Request, call_next):
            if request.url.path.startswith("/api/"):
                header = request.headers.get("authorization", "")
                if header != f"Bearer {auth_token}":
                    return JSONResponse(
                        status_code=401,
                        content={"code": "unauthorized", "message": "missing or bad token"},
                    )
            return await call_next(request)

    # -- cameras ---------------------------------------------------------------

    @app.get("/api/cameras")
    def list_cameras():
        return service.cameras_view()

    @app.post("/api/cameras", status_code=201)
    def create_camera(body: dict = Body(...)):
        from .service import camera_from_payload, camera_to_payload

        try:
            cam = camera_from_payload(body)
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(400, "invalid_camera", f"bad camera config: {exc}")
        try:
            service.add_camera(cam)
        except DuplicateCameraError as exc:
            raise ApiError(409, "camera_exists", str(exc))
        return camera_to_payload(cam)

    @app.patch("/api/cameras/{camera_id}")
    def patch_camera(camera_id: str, body: dict = Body(...)):
        from .detector import ExclusionMask
        from .service import camera_to_payload

        unknown = set(body) - set(PATCHABLE_FIELDS)
        if unknown:
            raise ApiError(400, "invalid_field", f"not patchable: {sorted(unknown)}")
        fields = dict(body)
        if "masks" in fields:
            try:
                fields["masks"] = tuple(ExclusionMask(*m) for m in fields["masks"])
            except (TypeError, ValueError) as exc:
                raise ApiError(400, "invalid_field", f"bad masks: {exc}")
        try:
            cam = service.update_camera(camera_id, **fields)
        except UnknownCameraError:
            raise ApiError(404, "camera_not_found", f"no camera {camera_id!r}")
        except ValueError as exc:
            raise ApiError(400, "invalid_field", str(exc))
        return camera_to_payload(cam)

    @app.get("/api/cameras/{camera_id}/latest")
    def camera_latest(camera_id: str):
        if camera_id not in service.registry:
            raise ApiError(404, "camera_not_found", f"no camera {camera_id!r}")
        latest = service.latest_view(camera_id)
        if latest is None:
            return Response(status_code=204)
        out = dict(latest)
        out["frame_url"] = f"/frames/{camera_id}.jpg"
        return out

    @app.get("/frames/{camera_id}.jpg")
    def camera_frame(camera_id: str):
        path = service.frames_dir / f"{camera_id}.jpg"
        if not path.exists():
            raise ApiError(404, "frame_not_found", f"no cached frame for {camera_id!r}")
        return FileResponse(path, media_type="image/jpeg")

    # -- alerts ----------------------------------------------------------------

    @app.get("/api/alerts")
    def list_alerts(state: str = Query("active")):
        if state == "active":
            return service.active_alerts_view()
        if state == "all":
            return service.all_alerts_view()
        raise ApiError(400, "invalid_state_filter", f"state must be active|all, got {state!r}")

    @app.post("/api/alerts/{alert_id}/ack")
    def ack_alert(alert_id: str, body: dict = Body(...)):
        operator = body.get("operator")
        if not operator or not isinstance(operator, str):
            raise ApiError(400, "missing_operator", "body must carry a non-empty operator")
        try:
            return service.ack_alert(alert_id, operator)
        except AlertNotFoundError:
            raise ApiError(404, "alert_not_found", f"no active alert {alert_id!r}")
        except InvalidPhaseError as exc:
            raise ApiError(409, "invalid_state", str(exc))

    # -- one-shot detection ------------------------------------------------------

    @app.post("/api/detect")
    async def detect(request: Request, image_id: str = Query("upload")):
        length = request.headers.get("content-length")
        if length and int(length) > MAX_UPLOAD_BYTES:
            raise ApiError(413, "payload_too_large", f"limit is {MAX_UPLOAD_BYTES} bytes")
        data = await request.body()
        if len(data) > MAX_UPLOAD_BYTES:
            raise ApiError(413, "payload_too_large", f"limit is {MAX_UPLOAD_BYTES} bytes")
        if not data:
            raise ApiError(400, "invalid_image", "empty request body")
        try:
            return await run_in_threadpool(service.detect_once, data, image_id)
        except ImageDecodeError as exc:
            raise ApiError(400, "invalid_image", str(exc))
        except BackendError as exc:
            raise ApiError(502, "backend_error", str(exc))

    # -- event stream -------------------------------------------------------------

    @app.get("/api/events/stream")
    async def events_stream(
        from_seq: int = Query(0, ge=0), limit: int | None = Query(None, ge=1)
    ):
        def generate():
            inbox: queue.Queue[LogRecord] = queue.Queue()
            service.subscribe(inbox.put)
            try:
                last = from_seq
                sent = 0
                # Backlog first; the subscription above catches appends racing us,
                # and the seq gate below deduplicates.
                for rec in service.log.records():
                    if rec.seq <= last:
                        continue
                    yield _sse(rec)
                    last = rec.seq
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
                while True:
                    try:
                        rec = inbox.get(timeout=STREAM_KEEPALIVE_S)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    if rec.seq <= last:
                        continue
                    yield _sse(rec)
                    last = rec.seq
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
            finally:
                service.unsubscribe(inbox.put)

        return StreamingResponse(generate(), media_type="text/event-stream")

    # -- metrics --------------------------------------------------------------------

    @app.get("/api/metrics")
    def metrics(request: Request):
        counters = service.metrics.snapshot()
        if "application/json" in request.headers.get("accept", ""):
            return JSONResponse(content=counters)
        body = "".join(f"{name} {value}\n" for name, value in sorted(counters.items()))
        return PlainTextResponse(body)

    console_dir = service.config.server.console_dir
    if console_dir and Path(console_dir).is_dir():
        app.mount("/", StaticFiles(directory=console_dir, html=True), name="console")

    return app
