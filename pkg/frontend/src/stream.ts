/** Event-stream reader over fetch/ReadableStream with seq-cursor resume.
 *
 * The server speaks SSE framing (`id:`/`data:` lines, blank-line delimited).
 * A plain fetch reader is used instead of EventSource so the same code runs
 * in the browser and under node-based tests. The cursor survives reconnects,
 * and events at or below it are dropped, so every event is applied once.
 */

import type { StreamEvent } from "./types";

export interface StreamOptions {
  reconnectDelayMs?: number;
  fromSeq?: number;
}

export class EventStream {
  cursor: number;
  private controller: AbortController | null = null;
  private running = false;
  private reconnectDelayMs: number;

  constructor(
    private base: string,
    private onEvent: (ev: StreamEvent) => void,
    opts: StreamOptions = {},
  ) {
    this.cursor = opts.fromSeq ?? 0;
    this.reconnectDelayMs = opts.reconnectDelayMs ?? 2000;
  }

  /** One connection: reads until the server closes or stop() aborts. */
  async connect(extraQuery: string = ""): Promise<void> {
    this.controller = new AbortController();
    const url = `${this.base}/api/events/stream?from_seq=${this.cursor}${extraQuery}`;
    const resp = await fetch(url, { signal: this.controller.signal });
    if (!resp.ok || !resp.body) {
      throw new Error(`stream connect failed: HTTP ${resp.status}`);
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let sep;
      while ((sep = buffer.indexOf("\n\n")) >= 0) {
        const frame = buffer.slice(0, sep);
        buffer = buffer.slice(sep + 2);
        this.handleFrame(frame);
      }
    }
  }

  private handleFrame(frame: string): void {
    for (const line of frame.split("\n")) {
      if (!line.startsWith("data: ")) continue; // id lines and keepalive comments
      let ev: StreamEvent;
      try {
        ev = JSON.parse(line.slice("data: ".length)) as StreamEvent;
      } catch {
        continue;
      }
      if (ev.seq <= this.cursor) continue; // duplicate after reconnect
      this.cursor = ev.seq;
      this.onEvent(ev);
    }
  }

  /** Keep a connection up, resuming from the cursor after any drop. */
  start(): void {
    if (this.running) return;
    this.running = true;
    const loop = async () => {
      while (this.running) {
        try {
          await this.connect();
        } catch {
          // fall through to the reconnect delay
        }
        if (!this.running) break;
        await new Promise((resolve) => setTimeout(resolve, this.reconnectDelayMs));
      }
    };
    void loop();
  }

  stop(): void {
    this.running = false;
    this.controller?.abort();
  }
}
