import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api";
import { projectBox } from "../src/overlay";
import { StubServer } from "./stub_server";

let stub: StubServer;
let api: ApiClient;

beforeEach(async () => {
  stub = new StubServer();
  stub.seedCamera("cam1");
  stub.seedLatest("cam1", [
    { x1: 10, y1: 10, x2: 40, y2: 35, class_id: 0, confidence: 0.91 },
  ]);
  await stub.start();
  api = new ApiClient(stub.base);
});

afterEach(async () => {
  await stub.stop();
});

describe("camera wall data", () => {
  it("overlay rectangles match the /latest payload", async () => {
    const latest = await api.latest("cam1");
    expect(latest).not.toBeNull();
    expect(latest!.detections).toHaveLength(1);
    // Tile canvas 320x240 over the 64x48 source: the overlay must land
    // exactly where the scaled detection says.
    const rect = projectBox(latest!.detections[0], 64, 48, 320, 240);
    expect(rect).toEqual({ x: 50, y: 50, w: 150, h: 125 });
  });

  it("never-polled camera yields null for latest", async () => {
    stub.seedCamera("cam2");
    expect(await api.latest("cam2")).toBeNull();
  });
});

describe("acknowledgement", () => {
  it("removes the alert and the server log gains an ack record", async () => {
    const alertId = stub.raiseAlert("cam1", 5);
    const row = await api.ackAlert(alertId, "watchstander");
    expect(row.state).toBe("acknowledged");
    expect(stub.ackLog).toEqual([{ alert_id: alertId, operator: "watchstander" }]);
  });

  it("unknown alert surfaces the server error code verbatim", async () => {
    const err = await api.ackAlert("ghost:1", "op").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(404);
    expect(err.code).toBe("alert_not_found");
  });

  it("double ack surfaces invalid_state", async () => {
    const alertId = stub.raiseAlert("cam1", 5);
    await api.ackAlert(alertId, "a");
    const err = await api.ackAlert(alertId, "b").catch((e) => e);
    expect(err.status).toBe(409);
    expect(err.code).toBe("invalid_state");
  });
});

describe("threshold steering", () => {
  it("slider PATCH is observable in GET /api/cameras", async () => {
    await api.patchCamera("cam1", { conf_threshold: 0.5 });
    const cameras = await api.listCameras();
    expect(cameras[0].camera.conf_threshold).toBe(0.5);
  });

  it("mask PATCH persists normalized rectangles", async () => {
    await api.patchCamera("cam1", { masks: [[0.25, 0.25, 0.5, 0.5]] });
    const cameras = await api.listCameras();
    expect(cameras[0].camera.masks).toEqual([[0.25, 0.25, 0.5, 0.5]]);
  });
});
