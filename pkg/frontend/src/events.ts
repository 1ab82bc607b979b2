// Ordered event stream with reconnect + resume.
//
// The gateway numbers frames per session; we remember the last seq we
// delivered and reconnect with ?after=<seq>, so a dropped socket never
// duplicates or skips a frame.

import type { EventFrame } from "./protocol.js";

// Structural subset of the browser WebSocket (and the `ws` package's
// compatible client), so tests can substitute a fake.
export interface WebSocketLike {
  onopen: ((ev: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev: any) => void) | null;
  onerror: ((ev: any) => void) | null;
  close(): void;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export interface EventStreamOptions {
  wsBaseUrl: string; // e.g. ws://localhost:8077
  sessionId: string;
  makeSocket: WebSocketFactory;
  onFrame: (frame: EventFrame) => void;
  onDrop?: () => void; // called when the socket drops before a reconnect
  reconnectDelayMs?: number;
}

export class EventStream {
  lastSeq = 0;

  private socket: WebSocketLike | null = null;
  private closed = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(private options: EventStreamOptions) {}

  get url(): string {
    const { wsBaseUrl, sessionId } = this.options;
    return `${wsBaseUrl}/api/sessions/${sessionId}/events?after=${this.lastSeq}`;
  }

  connect(): void {
    if (this.closed) return;
    const socket = this.options.makeSocket(this.url);
    this.socket = socket;
    socket.onmessage = (ev) => {
      let frame: EventFrame;
      try {
        frame = JSON.parse(String(ev.data)) as EventFrame;
      } catch {
        return;
      }
      if (frame.seq <= this.lastSeq) return; // replayed duplicate
      this.lastSeq = frame.seq;
      this.options.onFrame(frame);
    };
    socket.onclose = () => this.scheduleReconnect();
    socket.onerror = () => {
      // close follows; reconnect handled there
    };
  }

  private scheduleReconnect(): void {
    if (this.closed || this.timer) return;
    this.options.onDrop?.();
    this.timer = setTimeout(() => {
      this.timer = null;
      this.connect();
    }, this.options.reconnectDelayMs ?? 1000);
  }

  close(): void {
    this.closed = true;
    if (this.timer) clearTimeout(this.timer);
    this.socket?.close();
  }
}
