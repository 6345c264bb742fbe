import { describe, expect, it } from "vitest";

import type { StateMsg } from "../src/protocol.js";
import { DRIFT_ALERT_MM, STALE_AFTER_MS, Store } from "../src/store.js";

function stateMsg(over: Partial<{ drift: number; violation: boolean; t: number }> = {}): StateMsg {
  const axis = (drift: number) => ({
    set_mm: 225, meas_mm: 225, true_mm: 225 + drift, va_v: 0, pwm: 1,
    drift_mm: drift, clamped: false,
  });
  return {
    type: "state",
    t_ms: over.t ?? 0,
    axes: { x: axis(0), y: axis(0), z: axis(over.drift ?? 0) },
    theta_deg: 0,
    theta_set_deg: 0,
    calibrating: [],
    latency: {
      base_ms: 0, jitter_ms: 0, last_cmd_delay_ms: 0, max_delay_ms: 0,
      violation: over.violation ?? false,
    },
  };
}

describe("store", () => {
  it("centres the composed target from the hello bounds", () => {
    const s = new Store();
    s.onMessage({
      type: "hello", role: "operator",
      bounds_mm: { x: [0, 450], y: [0, 450], z: [0, 450] },
      tick_hz: 1000, state_hz: 50, theta_step_deg: 1.5, latency_limit_ms: 500,
    }, 0);
    expect(s.state.target).toEqual({ x_mm: 225, y_mm: 225, z_mm: 225, theta_deg: 0 });
    expect(s.state.role).toBe("operator");
  });

  it("drains only the newest snapshot per frame", () => {
    const s = new Store();
    s.onMessage(stateMsg({ t: 1 }), 0);
    s.onMessage(stateMsg({ t: 2 }), 10);
    s.onMessage(stateMsg({ t: 3 }), 20);
    const snap = s.drain();
    expect(snap?.t_ms).toBe(3);
    expect(s.drain()).toBeNull(); // queue emptied
    expect(s.state.snapshot?.t_ms).toBe(3);
  });

  it("declares the stream stale after half a second of silence", () => {
    const s = new Store();
    s.state.status = "connected";
    s.onMessage(stateMsg(), 1000);
    expect(s.isStale(1000 + STALE_AFTER_MS - 1)).toBe(false);
    expect(s.isStale(1000 + STALE_AFTER_MS + 1)).toBe(true);
  });

  it("raises the drift alert above the threshold and clears after homing", () => {
    const s = new Store();
    s.onMessage(stateMsg({ drift: DRIFT_ALERT_MM + 0.5 }), 0);
    s.drain();
    expect(s.driftAlert()).toBe(true);
    // a calibrated snapshot zeroes the displayed drift
    s.onMessage(stateMsg({ drift: 0 }), 20);
    s.drain();
    expect(s.driftAlert()).toBe(false);
    expect(s.maxDriftMm()).toBe(0);
  });

  it("exposes the latency violation flag verbatim", () => {
    const s = new Store();
    s.onMessage(stateMsg({ violation: true }), 0);
    s.drain();
    expect(s.latencyViolation()).toBe(true);
  });

  it("keeps a bounded error log", () => {
    const s = new Store();
    for (let i = 0; i < 30; i++) {
      s.onMessage({ type: "error", message: `e${i}` }, i);
    }
    expect(s.state.errors.length).toBe(20);
    expect(s.state.errors.at(-1)).toBe("e29");
  });
});
