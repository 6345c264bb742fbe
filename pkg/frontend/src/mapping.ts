// Pure input-mapping math: pointer position to workspace coordinates,
// scroll detents for z, stepper-grid snapping for the roll knob, and the
// send-rate limiter that coalesces steering updates.

export interface Bounds {
  min: number;
  max: number;
}

/** Map a pointer position on the canvas to workspace millimetres.
 *  Canvas (0,0) is top-left; workspace y grows away from the operator,
 *  so the vertical axis is flipped. Positions clamp to the bounds. */
export function pointerToWorkspace(
  px: number, py: number, width: number, height: number,
  xb: Bounds, yb: Bounds,
): { x_mm: number; y_mm: number } {
  const fx = Math.min(Math.max(px / width, 0), 1);
  const fy = Math.min(Math.max(py / height, 0), 1);
  return {
    x_mm: xb.min + fx * (xb.max - xb.min),
    y_mm: yb.min + (1 - fy) * (yb.max - yb.min),
  };
}

export function workspaceToPointer(
  x_mm: number, y_mm: number, width: number, height: number,
  xb: Bounds, yb: Bounds,
): { px: number; py: number } {
  return {
    px: ((x_mm - xb.min) / (xb.max - xb.min)) * width,
    py: (1 - (y_mm - yb.min) / (yb.max - yb.min)) * height,
  };
}

/** One-millimetre scroll detents for the z target. */
export function applyScrollDetent(z_mm: number, wheelDelta: number, zb: Bounds): number {
  const step = wheelDelta < 0 ? 1 : -1; // wheel up raises the tool
  const next = Math.round(z_mm) + step;
  return Math.min(Math.max(next, zb.min), zb.max);
}

/** Roll knob snapped to the stepper grid (one physical step). */
export function snapTheta(theta_deg: number, step_deg: number): number {
  const snapped = Math.round(theta_deg / step_deg) * step_deg;
  // keep within (-180, 180]
  if (snapped <= -180) return snapped + 360;
  if (snapped > 180) return snapped - 360;
  return snapped;
}

/** Coalesces steering updates to at most maxHz sends per second.
 *  The latest pose always wins; intermediate poses are dropped. */
export class TargetCoalescer {
  private pending: unknown = null;
  private lastSent = -Infinity;
  private readonly minGapMs: number;

  constructor(maxHz: number) {
    this.minGapMs = 1000 / maxHz;
  }

  /** Offer a new pose at time nowMs; returns the pose to send now, if any. */
  offer<T>(pose: T, nowMs: number): T | null {
    this.pending = pose;
    return this.take(nowMs);
  }

  /** Poll for a deferred pose (call on a timer). */
  take<T>(nowMs: number): T | null {
    if (this.pending === null) return null;
    if (nowMs - this.lastSent < this.minGapMs) return null;
    const out = this.pending as T;
    this.pending = null;
    this.lastSent = nowMs;
    return out;
  }

  get hasPending(): boolean {
    return this.pending !== null;
  }
}
