/** Payload shapes of the smokewatch HTTP API consumed by the console. */

export interface CameraRecord {
  id: string;
  url: string;
  name: string;
  poll_interval: number;
  conf_threshold: number;
  masks: number[][]; // normalized [x1, y1, x2, y2] rectangles
  enabled: boolean;
}

export interface PollStatus {
  state: "ok" | "backing_off" | "disabled";
  consecutive_failures: number;
  next_attempt: number;
  last_success: number | null;
  failure_kind: string | null;
}

export interface CameraView {
  camera: CameraRecord;
  poll_status: PollStatus;
  phase: "idle" | "active" | "acknowledged" | "cooldown";
}

export interface DetectionRecord {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  class_id: number;
  confidence: number;
}

export interface LatestFrame {
  camera_id: string;
  frame_seq: number;
  at: number;
  image_id: string;
  positive: boolean;
  max_confidence: number;
  detection_count: number;
  detections: DetectionRecord[];
  model_id: string;
  frame_url: string;
}

export interface AlertRow {
  alert_id: string;
  camera_id: string;
  state: "active" | "acknowledged" | "cleared";
  raised_at: number;
  frame_seq: number;
  max_confidence: number;
  operator?: string;
}

export interface StreamEvent {
  seq: number;
  at: string;
  kind: "detection" | "alert" | "camera_config" | "ack" | "poll_status";
  payload: Record<string, unknown>;
}
