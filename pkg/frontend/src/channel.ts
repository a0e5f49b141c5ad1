import type { ServerFrame } from "./types.js";

/**
 * The slice of the WebSocket API the channel needs. Both the browser's
 * WebSocket and Node's `ws` client satisfy it; the handler properties
 * take `any` because each implementation names its own event classes.
 */
/* eslint-disable @typescript-eslint/no-explicit-any */
export interface WebSocketLike {
  onopen: ((event: any) => void) | null;
  onmessage: ((event: any) => void) | null;
  onclose: ((event: any) => void) | null;
  onerror: ((event: any) => void) | null;
  send(data: string): void;
  close(code?: number, reason?: string): void;
  readyState: number;
}

export type WebSocketCtor = new (url: string) => WebSocketLike;

const WS_OPEN = 1;

export interface ChannelEvents {
  /** Server frames, invoked strictly in arrival order. */
  onFrame: (frame: ServerFrame) => void;
  onClose?: (code: number, reason: string) => void;
  onError?: (detail: string) => void;
}

/**
 * One realtime connection for one session. Owns the keepalive timer:
 * while open it sends an empty chat frame (a pure heartbeat, never
 * relayed) every `keepaliveMs`.
 */
export class SessionChannel {
  private ws: WebSocketLike | null = null;
  private keepaliveTimer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly url: string,
    private readonly WebSocketImpl: WebSocketCtor,
    private readonly events: ChannelEvents,
    private readonly keepaliveMs = 1000,
  ) {}

  connect(): void {
    const ws = new this.WebSocketImpl(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.keepaliveTimer = setInterval(() => this.keepalive(), this.keepaliveMs);
    };
    ws.onmessage = (event: { data: unknown }) => {
      const raw = typeof event.data === "string" ? event.data : String(event.data);
      let frame: ServerFrame;
      try {
        frame = JSON.parse(raw) as ServerFrame;
      } catch {
        this.events.onError?.("unparseable frame from server");
        return;
      }
      this.events.onFrame(frame);
    };
    ws.onclose = (event: { code: number; reason: string }) => {
      this.stopKeepalive();
      this.events.onClose?.(event.code, event.reason);
    };
    ws.onerror = () => {
      this.events.onError?.("channel transport error");
    };
  }

  get open(): boolean {
    return this.ws !== null && this.ws.readyState === WS_OPEN;
  }

  sendChat(text: string): void {
    this.sendFrame({ frame_type: "chat", body: { text } });
  }

  sendSignal(kind: "offer" | "answer" | "candidate", body: Record<string, unknown>): void {
    this.sendFrame({ frame_type: kind, body });
  }

  keepalive(): void {
    this.sendFrame({ frame_type: "chat", body: {} });
  }

  private sendFrame(frame: { frame_type: string; body: Record<string, unknown> }): void {
    if (this.open) this.ws!.send(JSON.stringify(frame));
  }

  close(): void {
    this.stopKeepalive();
    if (this.ws !== null && this.ws.readyState <= WS_OPEN) {
      this.ws.close(1000, "bye");
    }
    this.ws = null;
  }

  private stopKeepalive(): void {
    if (this.keepaliveTimer !== null) {
      clearInterval(this.keepaliveTimer);
      this.keepaliveTimer = null;
    }
  }
}
