/** Thin fetch client; server error codes surface verbatim as ApiError. */

import type { AlertRow, CameraRecord, CameraView, LatestFrame } from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(private base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T | null> {
    const resp = await fetch(this.base + path, init);
    if (resp.status === 204) return null;
    if (!resp.ok) {
      let code = "http_error";
      let message = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.code === "string") {
          code = body.code;
          message = body.message ?? message;
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, code, message);
    }
    return (await resp.json()) as T;
  }

  listCameras(): Promise<CameraView[]> {
    return this.request<CameraView[]>("/api/cameras") as Promise<CameraView[]>;
  }

  latest(cameraId: string): Promise<LatestFrame | null> {
    return this.request<LatestFrame>(`/api/cameras/${encodeURIComponent(cameraId)}/latest`);
  }

  activeAlerts(): Promise<AlertRow[]> {
    return this.request<AlertRow[]>("/api/alerts?state=active") as Promise<AlertRow[]>;
  }

  ackAlert(alertId: string, operator: string): Promise<AlertRow> {
    return this.request<AlertRow>(`/api/alerts/${encodeURIComponent(alertId)}/ack`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ operator }),
    }) as Promise<AlertRow>;
  }

  patchCamera(cameraId: string, fields: Partial<CameraRecord>): Promise<CameraRecord> {
    return this.request<CameraRecord>(`/api/cameras/${encodeURIComponent(cameraId)}`, {
      method: "PATCH",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(fields),
    }) as Promise<CameraRecord>;
  }

  frameUrl(cameraId: string): string {
    return `${this.base}/frames/${encodeURIComponent(cameraId)}.jpg`;
  }
}
