/** Box projection and drawing math for camera tiles and mask editing.
 *
 * Detections arrive in source-image pixels; tiles render at arbitrary
 * canvas sizes, so everything scales through the source dimensions. Masks
 * are edited in canvas pixels and persisted normalized to [0,1].
 */

import type { DetectionRecord } from "./types";

export interface CanvasRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export function projectBox(
  box: { x1: number; y1: number; x2: number; y2: number },
  srcW: number,
  srcH: number,
  canvasW: number,
  canvasH: number,
): CanvasRect {
  const sx = canvasW / srcW;
  const sy = canvasH / srcH;
  return {
    x: box.x1 * sx,
    y: box.y1 * sy,
    w: (box.x2 - box.x1) * sx,
    h: (box.y2 - box.y1) * sy,
  };
}

/** Drag rectangle (canvas pixels, any corner order) to a normalized mask.
 * Returns null for degenerate (zero-area) rectangles, which are rejected
 * client-side before any PATCH is issued. */
export function dragToMask(
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  canvasW: number,
  canvasH: number,
): [number, number, number, number] | null {
  if (canvasW <= 0 || canvasH <= 0) return null;
  const clamp01 = (v: number) => Math.min(Math.max(v, 0), 1);
  const nx1 = clamp01(Math.min(x0, x1) / canvasW);
  const ny1 = clamp01(Math.min(y0, y1) / canvasH);
  const nx2 = clamp01(Math.max(x0, x1) / canvasW);
  const ny2 = clamp01(Math.max(y0, y1) / canvasH);
  if (nx2 - nx1 <= 0 || ny2 - ny1 <= 0) return null;
  return [nx1, ny1, nx2, ny2];
}

export function maskToCanvas(
  mask: number[],
  canvasW: number,
  canvasH: number,
): CanvasRect {
  const [x1, y1, x2, y2] = mask;
  return {
    x: x1 * canvasW,
    y: y1 * canvasH,
    w: (x2 - x1) * canvasW,
    h: (y2 - y1) * canvasH,
  };
}

/** Minimal surface of CanvasRenderingContext2D the drawing code needs;
 * tests supply a recording fake. */
export interface DrawContext {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

export function drawDetections(
  ctx: DrawContext,
  detections: DetectionRecord[],
  srcW: number,
  srcH: number,
  canvasW: number,
  canvasH: number,
): CanvasRect[] {
  const rects: CanvasRect[] = [];
  ctx.lineWidth = 2;
  ctx.font = "11px sans-serif";
  for (const det of detections) {
    const rect = projectBox(det, srcW, srcH, canvasW, canvasH);
    ctx.strokeStyle = "#ff3b30";
    ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);
    ctx.fillStyle = "#ff3b30";
    ctx.fillText(det.confidence.toFixed(2), rect.x + 2, Math.max(rect.y - 3, 10));
    rects.push(rect);
  }
  return rects;
}

export function drawMasks(
  ctx: DrawContext,
  masks: number[][],
  canvasW: number,
  canvasH: number,
): void {
  ctx.lineWidth = 1;
  for (const mask of masks) {
    const rect = maskToCanvas(mask, canvasW, canvasH);
    ctx.fillStyle = "rgba(120, 120, 140, 0.35)";
    ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
    ctx.strokeStyle = "rgba(120, 120, 140, 0.9)";
    ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);
  }
}
