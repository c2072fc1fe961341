import { describe, expect, it } from "vitest";

import { ConsoleStore } from "../src/state";
import type { AlertRow, CameraView, StreamEvent } from "../src/types";

function cameraView(id: string): CameraView {
  return {
    camera: {
      id,
      url: `http://cams/${id}.jpg`,
      name: id,
      poll_interval: 30,
      conf_threshold: 0.298,
      masks: [],
      enabled: true,
    },
    poll_status: {
      state: "ok",
      consecutive_failures: 0,
      next_attempt: 0,
      last_success: null,
      failure_kind: null,
    },
    phase: "idle",
  };
}

function raised(seq: number, alertId = "cam1:5"): StreamEvent {
  return {
    seq,
    at: "2026-08-10T00:00:00Z",
    kind: "alert",
    payload: {
      alert_id: alertId,
      camera_id: "cam1",
      kind: "raised",
      at: 1005,
      frame_seq: 5,
      max_confidence: 0.91,
    },
  };
}

describe("ConsoleStore", () => {
  it("adds an alert row and highlights the camera on raise", () => {
    const raisedRows: AlertRow[] = [];
    const store = new ConsoleStore({ onAlertRaised: (r) => raisedRows.push(r) });
    store.setCameras([cameraView("cam1")]);
    store.applyEvent(raised(1));
    expect(store.alertRows()).toHaveLength(1);
    expect(store.alertRows()[0].state).toBe("active");
    expect(store.camera("cam1")?.phase).toBe("active");
    expect(raisedRows).toHaveLength(1);
  });

  it("never duplicates a row for a replayed raise", () => {
    const store = new ConsoleStore();
    store.setCameras([cameraView("cam1")]);
    store.applyEvent(raised(1));
    store.applyEvent(raised(1));
    store.applyEvent(raised(2)); // same alert id arriving again after reconnect
    expect(store.alertRows()).toHaveLength(1);
  });

  it("removes the row on cleared, even when concurrent with an ack", () => {
    const store = new ConsoleStore();
    store.setCameras([cameraView("cam1")]);
    store.applyEvent(raised(1));
    store.ackOptimistic("cam1:5", "op");
    store.applyEvent({
      seq: 2,
      at: "t",
      kind: "alert",
      payload: { alert_id: "cam1:5", camera_id: "cam1", kind: "cleared", at: 1015 },
    });
    expect(store.alertRows()).toHaveLength(0);
    expect(store.camera("cam1")?.phase).toBe("cooldown");
  });

  it("ack event reconciles the optimistic state with the operator", () => {
    const store = new ConsoleStore();
    store.setCameras([cameraView("cam1")]);
    store.applyEvent(raised(1));
    store.ackOptimistic("cam1:5", "me");
    store.applyEvent({
      seq: 2,
      at: "t",
      kind: "ack",
      payload: { alert_id: "cam1:5", camera_id: "cam1", operator: "ranger", at: 2000 },
    });
    const row = store.alertRows()[0];
    expect(row.state).toBe("acknowledged");
    expect(row.operator).toBe("ranger");
    expect(store.camera("cam1")?.phase).toBe("acknowledged");
  });

  it("detection events update the latest-frame cache", () => {
    const store = new ConsoleStore();
    store.setCameras([cameraView("cam1")]);
    store.applyEvent({
      seq: 1,
      at: "t",
      kind: "detection",
      payload: {
        camera_id: "cam1",
        frame_seq: 7,
        at: 1007,
        image_id: "cam1/000007",
        positive: true,
        max_confidence: 0.8,
        detection_count: 1,
        detections: [{ x1: 1, y1: 2, x2: 3, y2: 4, class_id: 0, confidence: 0.8 }],
        model_id: "m",
      },
    });
    expect(store.latest.get("cam1")?.frame_seq).toBe(7);
    expect(store.latest.get("cam1")?.detections).toHaveLength(1);
  });

  it("poll_status events flip the staleness state", () => {
    const store = new ConsoleStore();
    store.setCameras([cameraView("cam1")]);
    store.applyEvent({
      seq: 1,
      at: "t",
      kind: "poll_status",
      payload: { camera_id: "cam1", state: "backing_off", consecutive_failures: 2, failure_kind: "status" },
    });
    expect(store.camera("cam1")?.poll_status.state).toBe("backing_off");
  });

  it("camera_config events update thresholds in place", () => {
    const store = new ConsoleStore();
    store.setCameras([cameraView("cam1")]);
    const cam = { ...cameraView("cam1").camera, conf_threshold: 0.5 };
    store.applyEvent({ seq: 1, at: "t", kind: "camera_config", payload: { action: "update", camera: cam } });
    expect(store.camera("cam1")?.camera.conf_threshold).toBe(0.5);
  });
});
