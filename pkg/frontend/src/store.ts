// Console state: connection status, the latest server snapshot, the pose
// being composed, latency knobs and staleness. Snapshots queue up as they
// arrive and the newest one is drained per animation frame.

import type { HelloMsg, ServerMsg, StateMsg, TargetPose } from "./protocol.js";

export const STALE_AFTER_MS = 500;
export const DRIFT_ALERT_MM = 2.0;

export type ConnStatus = "connecting" | "connected" | "closed";

export interface UiState {
  status: ConnStatus;
  role: string;
  hello: HelloMsg | null;
  snapshot: StateMsg | null;
  lastSnapshotAt: number; // wall ms of last state message
  target: TargetPose;
  latencyBase: number;
  latencyJitter: number;
  errors: string[];
}

export class Store {
  state: UiState = {
    status: "connecting",
    role: "",
    hello: null,
    snapshot: null,
    lastSnapshotAt: -Infinity,
    target: { x_mm: 225, y_mm: 225, z_mm: 225, theta_deg: 0 },
    latencyBase: 0,
    latencyJitter: 0,
    errors: [],
  };
  private queue: StateMsg[] = [];

  onMessage(msg: ServerMsg, nowMs: number): void {
    switch (msg.type) {
      case "hello": {
        this.state.hello = msg;
        this.state.role = msg.role;
        const b = msg.bounds_mm;
        this.state.target = {
          x_mm: (b.x[0] + b.x[1]) / 2,
          y_mm: (b.y[0] + b.y[1]) / 2,
          z_mm: (b.z[0] + b.z[1]) / 2,
          theta_deg: 0,
        };
        break;
      }
      case "state":
        this.queue.push(msg);
        this.state.lastSnapshotAt = nowMs;
        break;
      case "error":
        this.state.errors.push(msg.message);
        if (this.state.errors.length > 20) this.state.errors.shift();
        break;
      case "ack":
        break;
    }
  }

  /** Adopt the newest queued snapshot (drop older ones); per-frame. */
  drain(): StateMsg | null {
    if (this.queue.length === 0) return null;
    const newest = this.queue[this.queue.length - 1];
    this.queue.length = 0;
    this.state.snapshot = newest;
    return newest;
  }

  isStale(nowMs: number): boolean {
    return (
      this.state.status === "connected" &&
      nowMs - this.state.lastSnapshotAt > STALE_AFTER_MS
    );
  }

  /** Largest |drift| over the axes of the current snapshot, mm. */
  maxDriftMm(): number {
    const snap = this.state.snapshot;
    if (!snap) return 0;
    return Math.max(
      ...(["x", "y", "z"] as const).map((a) => Math.abs(snap.axes[a].drift_mm)),
    );
  }

  driftAlert(): boolean {
    return this.maxDriftMm() > DRIFT_ALERT_MM;
  }

  latencyViolation(): boolean {
    return this.state.snapshot?.latency.violation ?? false;
  }
}
