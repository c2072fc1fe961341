/** Browser entry: camera wall, alarm queue, per-camera steering panel. */

import { ApiClient, ApiError } from "./api";
import { drawDetections, drawMasks, dragToMask } from "./overlay";
import { ConsoleStore } from "./state";
import { EventStream } from "./stream";
import type { AlertRow, CameraView } from "./types";

const api = new ApiClient("");
const wall = document.getElementById("camera-wall") as HTMLElement;
const alertList = document.getElementById("alert-list") as HTMLElement;
const toasts = document.getElementById("toasts") as HTMLElement;
const panel = document.getElementById("camera-panel") as HTMLElement;

let selectedCamera: string | null = null;
let pendingMask: [number, number, number, number] | null = null;

function toast(text: string): void {
  const el = document.createElement("div");
  el.className = "toast";
  el.textContent = text;
  toasts.appendChild(el);
  setTimeout(() => el.remove(), 4000);
}

function beep(): void {
  try {
    const ctx = new AudioContext();
    const osc = ctx.createOscillator();
    osc.frequency.value = 880;
    osc.connect(ctx.destination);
    osc.start();
    osc.stop(ctx.currentTime + 0.4);
  } catch {
    // audio is best-effort; some browsers block it before user interaction
  }
}

const store = new ConsoleStore({
  onChange: render,
  onAlertRaised: (row: AlertRow) => {
    beep();
    toast(`ALERT raised: ${row.camera_id} (conf ${row.max_confidence.toFixed(2)})`);
  },
});

const stream = new EventStream("", (ev) => store.applyEvent(ev));

function cameraTile(view: CameraView): HTMLElement {
  const tile = document.createElement("div");
  tile.className = `tile phase-${view.phase}`;
  const latest = store.latest.get(view.camera.id);

  const header = document.createElement("div");
  header.className = "tile-header";
  header.textContent = view.camera.name || view.camera.id;
  if (view.poll_status.state === "backing_off") {
    const badge = document.createElement("span");
    badge.className = "badge stale";
    badge.textContent = `stale (${view.poll_status.failure_kind ?? "error"})`;
    header.appendChild(badge);
  }
  if (view.phase === "active" || view.phase === "acknowledged") {
    const badge = document.createElement("span");
    badge.className = "badge alarm";
    badge.textContent = view.phase;
    header.appendChild(badge);
  }
  tile.appendChild(header);

  const frame = document.createElement("div");
  frame.className = "frame";
  const img = new Image();
  img.src = latest ? `${latest.frame_url}?seq=${latest.frame_seq}` : api.frameUrl(view.camera.id);
  const canvas = document.createElement("canvas");
  canvas.width = 320;
  canvas.height = 240;
  img.onload = () => {
    canvas.width = frame.clientWidth || 320;
    canvas.height = Math.round(canvas.width * (img.naturalHeight / img.naturalWidth)) || 240;
    const ctx = canvas.getContext("2d");
    if (!ctx || !latest) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    drawMasks(ctx, view.camera.masks, canvas.width, canvas.height);
    drawDetections(
      ctx,
      latest.detections,
      img.naturalWidth,
      img.naturalHeight,
      canvas.width,
      canvas.height,
    );
  };
  frame.appendChild(img);
  frame.appendChild(canvas);
  tile.appendChild(frame);

  tile.onclick = () => {
    selectedCamera = view.camera.id;
    render();
  };
  return tile;
}

function alertEntry(row: AlertRow): HTMLElement {
  const el = document.createElement("div");
  el.className = `alert-row state-${row.state}`;
  const label = document.createElement("span");
  label.textContent =
    `${row.camera_id} · frame ${row.frame_seq} · conf ${row.max_confidence.toFixed(2)}` +
    (row.operator ? ` · ack ${row.operator}` : "");
  el.appendChild(label);
  if (row.state === "active") {
    const button = document.createElement("button");
    button.textContent = "Acknowledge";
    button.onclick = async () => {
      const operator = (document.getElementById("operator") as HTMLInputElement).value || "operator";
      store.ackOptimistic(row.alert_id, operator);
      try {
        await api.ackAlert(row.alert_id, operator);
      } catch (err) {
        if (err instanceof ApiError) toast(`ack failed: ${err.code} (${err.status})`);
        await refreshAlerts(); // reconcile with the server
      }
    };
    el.appendChild(button);
  }
  return el;
}

function steeringPanel(view: CameraView): HTMLElement {
  const root = document.createElement("div");
  const title = document.createElement("h3");
  title.textContent = `Steer ${view.camera.id}`;
  root.appendChild(title);

  const sliderLabel = document.createElement("label");
  sliderLabel.textContent = `confidence threshold: ${view.camera.conf_threshold.toFixed(3)} `;
  const slider = document.createElement("input");
  slider.type = "range";
  slider.min = "0";
  slider.max = "1";
  slider.step = "0.001";
  slider.value = String(view.camera.conf_threshold);
  slider.onchange = async () => {
    try {
      await api.patchCamera(view.camera.id, { conf_threshold: Number(slider.value) });
    } catch (err) {
      if (err instanceof ApiError) toast(`update failed: ${err.code}`);
    }
  };
  sliderLabel.appendChild(slider);
  root.appendChild(sliderLabel);

  const maskCanvas = document.createElement("canvas");
  maskCanvas.className = "mask-editor";
  maskCanvas.width = 320;
  maskCanvas.height = 240;
  const redrawMasks = () => {
    const ctx = maskCanvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, maskCanvas.width, maskCanvas.height);
    drawMasks(ctx, view.camera.masks, maskCanvas.width, maskCanvas.height);
    if (pendingMask) drawMasks(ctx, [pendingMask as unknown as number[]], maskCanvas.width, maskCanvas.height);
  };
  let dragStart: [number, number] | null = null;
  maskCanvas.onmousedown = (e) => {
    dragStart = [e.offsetX, e.offsetY];
  };
  maskCanvas.onmouseup = (e) => {
    if (!dragStart) return;
    const mask = dragToMask(dragStart[0], dragStart[1], e.offsetX, e.offsetY, maskCanvas.width, maskCanvas.height);
    dragStart = null;
    if (!mask) {
      toast("mask rejected: zero-area rectangle");
      return;
    }
    pendingMask = mask;
    redrawMasks();
  };
  root.appendChild(maskCanvas);
  redrawMasks();

  const save = document.createElement("button");
  save.textContent = "Save mask";
  save.onclick = async () => {
    if (!pendingMask) return;
    try {
      await api.patchCamera(view.camera.id, {
        masks: [...view.camera.masks, pendingMask as unknown as number[]],
      });
      pendingMask = null;
    } catch (err) {
      if (err instanceof ApiError) toast(`mask save failed: ${err.code}`);
    }
  };
  root.appendChild(save);
  return root;
}

function render(): void {
  wall.replaceChildren(...[...store.cameras.values()].map(cameraTile));
  alertList.replaceChildren(...store.alertRows().map(alertEntry));
  panel.replaceChildren();
  if (selectedCamera) {
    const view = store.camera(selectedCamera);
    if (view) panel.appendChild(steeringPanel(view));
  }
}

async function refreshAlerts(): Promise<void> {
  store.setActiveAlerts(await api.activeAlerts());
}

async function boot(): Promise<void> {
  const cameras = await api.listCameras();
  store.setCameras(cameras);
  await refreshAlerts();
  await Promise.all(
    cameras.map(async (view) => store.setLatest(view.camera.id, await api.latest(view.camera.id))),
  );
  stream.start();
  setInterval(async () => {
    // Frame images refresh out-of-band from the stream.
    for (const view of store.cameras.values()) {
      store.setLatest(view.camera.id, await api.latest(view.camera.id));
    }
  }, 15000);
}

boot().catch((err) => toast(`console failed to start: ${err}`));
