// Thin WebSocket wrapper: parse inbound frames into the store, expose a
// send hook, reconnect with a fixed backoff when the link drops.

import { parseServerMsg } from "./protocol.js";
import type { Store } from "./store.js";

const RECONNECT_MS = 1500;

export class TeleopSocket {
  private ws: WebSocket | null = null;
  private closed = false;

  constructor(private url: string, private store: Store) {}

  connect(): void {
    this.store.state.status = "connecting";
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.store.state.status = "connected";
    };
    ws.onmessage = (ev) => {
      const msg = parseServerMsg(String(ev.data));
      if (msg) this.store.onMessage(msg, performance.now());
    };
    ws.onclose = () => {
      this.store.state.status = "closed";
      this.ws = null;
      if (!this.closed) setTimeout(() => this.connect(), RECONNECT_MS);
    };
    ws.onerror = () => ws.close();
  }

  send(text: string): boolean {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(text);
      return true;
    }
    return false;
  }

  shutdown(): void {
    this.closed = true;
    this.ws?.close();
  }
}
