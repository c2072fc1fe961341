/** Console view-model: a cache over the API plus the event stream.
 *
 * Nothing here is authoritative; reloading the page rebuilds the same view
 * from GET requests and stream resume. Alert rows are keyed by alert id, so
 * a raise replayed after reconnect can never duplicate a row.
 */

import type {
  AlertRow,
  CameraRecord,
  CameraView,
  DetectionRecord,
  LatestFrame,
  StreamEvent,
} from "./types";

export interface StoreEvents {
  onChange?: () => void;
  onAlertRaised?: (row: AlertRow) => void;
}

export class ConsoleStore {
  cameras = new Map<string, CameraView>();
  latest = new Map<string, LatestFrame>();
  private alerts = new Map<string, AlertRow>();

  constructor(private events: StoreEvents = {}) {}

  private changed(): void {
    this.events.onChange?.();
  }

  /** Seed from GET /api/cameras. */
  setCameras(views: CameraView[]): void {
    this.cameras = new Map(views.map((v) => [v.camera.id, v]));
    this.changed();
  }

  /** Seed from GET /api/alerts?state=active. */
  setActiveAlerts(rows: AlertRow[]): void {
    this.alerts = new Map(rows.map((r) => [r.alert_id, r]));
    this.changed();
  }

  setLatest(cameraId: string, frame: LatestFrame | null): void {
    if (frame) this.latest.set(cameraId, frame);
    this.changed();
  }

  alertRows(): AlertRow[] {
    return [...this.alerts.values()];
  }

  camera(cameraId: string): CameraView | undefined {
    return this.cameras.get(cameraId);
  }

  /** Mark the row acknowledged before the server round-trip lands. */
  ackOptimistic(alertId: string, operator: string): void {
    const row = this.alerts.get(alertId);
    if (row && row.state === "active") {
      row.state = "acknowledged";
      row.operator = operator;
      this.changed();
    }
  }

  private setPhase(cameraId: string, phase: CameraView["phase"]): void {
    const view = this.cameras.get(cameraId);
    if (view) view.phase = phase;
  }

  /** Fold one stream event into the view. The stream client already
   * deduplicates by seq; this only has to apply payloads. */
  applyEvent(ev: StreamEvent): void {
    const p = ev.payload as Record<string, any>;
    switch (ev.kind) {
      case "alert": {
        const alertId = p.alert_id as string;
        if (p.kind === "raised") {
          if (!this.alerts.has(alertId)) {
            const row: AlertRow = {
              alert_id: alertId,
              camera_id: p.camera_id,
              state: "active",
              raised_at: p.at,
              frame_seq: p.frame_seq,
              max_confidence: p.max_confidence,
            };
            this.alerts.set(alertId, row);
            this.events.onAlertRaised?.(row);
          }
          this.setPhase(p.camera_id, "active");
        } else if (p.kind === "cleared") {
          this.alerts.delete(alertId);
          this.setPhase(p.camera_id, "cooldown");
        } else if (p.kind === "acknowledged") {
          const row = this.alerts.get(alertId);
          if (row) row.state = "acknowledged";
          this.setPhase(p.camera_id, "acknowledged");
        }
        break;
      }
      case "ack": {
        const row = this.alerts.get(p.alert_id as string);
        if (row) {
          row.state = "acknowledged";
          row.operator = p.operator;
        }
        this.setPhase(p.camera_id, "acknowledged");
        break;
      }
      case "detection": {
        const cameraId = p.camera_id as string;
        const existing = this.latest.get(cameraId);
        this.latest.set(cameraId, {
          camera_id: cameraId,
          frame_seq: p.frame_seq,
          at: p.at,
          image_id: p.image_id,
          positive: p.positive,
          max_confidence: p.max_confidence,
          detection_count: p.detection_count,
          detections: (p.detections ?? []) as DetectionRecord[],
          model_id: p.model_id ?? existing?.model_id ?? "",
          frame_url: existing?.frame_url ?? `/frames/${cameraId}.jpg`,
        });
        break;
      }
      case "poll_status": {
        const view = this.cameras.get(p.camera_id as string);
        if (view) {
          view.poll_status.state = p.state;
          view.poll_status.consecutive_failures = p.consecutive_failures ?? 0;
          view.poll_status.failure_kind = p.failure_kind ?? null;
        }
        break;
      }
      case "camera_config": {
        const cam = p.camera as CameraRecord;
        const view = this.cameras.get(cam.id);
        if (view) {
          view.camera = cam;
        } else {
          this.cameras.set(cam.id, {
            camera: cam,
            poll_status: {
              state: cam.enabled ? "ok" : "disabled",
              consecutive_failures: 0,
              next_attempt: 0,
              last_success: null,
              failure_kind: null,
            },
            phase: "idle",
          });
        }
        break;
      }
    }
    this.changed();
  }
}
