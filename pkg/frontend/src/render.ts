// Canvas + DOM rendering. Every number drawn here is taken verbatim from
// the latest `state` snapshot; the console never extrapolates.

import { workspaceToPointer } from "./mapping.js";
import type { StateMsg, HelloMsg, TargetPose } from "./protocol.js";

export interface RenderRefs {
  canvas: HTMLCanvasElement;
  zGauge: HTMLCanvasElement;
  thetaDial: HTMLCanvasElement;
  statusEl: HTMLElement;
  flagsEl: HTMLElement;
  readoutEl: HTMLElement;
  calibrateBtn: HTMLButtonElement;
  errorsEl: HTMLElement;
}

const COLORS = { set: "#3b82f6", meas: "#10b981", true: "#94a3b8" };

export function drawTopDown(
  refs: RenderRefs, hello: HelloMsg, snap: StateMsg | null, target: TargetPose,
): void {
  const ctx = refs.canvas.getContext("2d")!;
  const { width, height } = refs.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#475569";
  ctx.strokeRect(0.5, 0.5, width - 1, height - 1);
  const xb = { min: hello.bounds_mm.x[0], max: hello.bounds_mm.x[1] };
  const yb = { min: hello.bounds_mm.y[0], max: hello.bounds_mm.y[1] };

  const cursor = workspaceToPointer(target.x_mm, target.y_mm, width, height, xb, yb);
  ctx.strokeStyle = "#eab308";
  ctx.beginPath();
  ctx.moveTo(cursor.px - 8, cursor.py);
  ctx.lineTo(cursor.px + 8, cursor.py);
  ctx.moveTo(cursor.px, cursor.py - 8);
  ctx.lineTo(cursor.px, cursor.py + 8);
  ctx.stroke();

  if (!snap) return;
  const marks: [string, number, number][] = [
    [COLORS.set, snap.axes.x.set_mm, snap.axes.y.set_mm],
    [COLORS.true, snap.axes.x.true_mm, snap.axes.y.true_mm],
    [COLORS.meas, snap.axes.x.meas_mm, snap.axes.y.meas_mm],
  ];
  for (const [color, x, y] of marks) {
    const pt = workspaceToPointer(x, y, width, height, xb, yb);
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(pt.px, pt.py, color === COLORS.meas ? 6 : 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}

export function drawZGauge(refs: RenderRefs, hello: HelloMsg,
                           snap: StateMsg | null, target: TargetPose): void {
  const ctx = refs.zGauge.getContext("2d")!;
  const { width, height } = refs.zGauge;
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#475569";
  ctx.strokeRect(0.5, 0.5, width - 1, height - 1);
  const [lo, hi] = hello.bounds_mm.z;
  const toY = (mm: number) => height - ((mm - lo) / (hi - lo)) * height;
  ctx.strokeStyle = "#eab308";
  ctx.beginPath();
  ctx.moveTo(0, toY(target.z_mm));
  ctx.lineTo(width, toY(target.z_mm));
  ctx.stroke();
  if (!snap) return;
  const bars: [string, number][] = [
    [COLORS.set, snap.axes.z.set_mm],
    [COLORS.true, snap.axes.z.true_mm],
    [COLORS.meas, snap.axes.z.meas_mm],
  ];
  bars.forEach(([color, mm], i) => {
    ctx.fillStyle = color;
    ctx.fillRect(4 + i * ((width - 8) / 3), toY(mm) - 2, (width - 8) / 3 - 2, 4);
  });
}

export function drawThetaDial(refs: RenderRefs, snap: StateMsg | null,
                              target: TargetPose): void {
  const ctx = refs.thetaDial.getContext("2d")!;
  const { width, height } = refs.thetaDial;
  const r = Math.min(width, height) / 2 - 6;
  const cx = width / 2;
  const cy = height / 2;
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#475569";
  ctx.beginPath();
  ctx.arc(cx, cy, r, 0, 2 * Math.PI);
  ctx.stroke();
  const needle = (deg: number, color: string, len: number) => {
    const a = ((deg - 90) * Math.PI) / 180;
    ctx.strokeStyle = color;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + len * Math.cos(a), cy + len * Math.sin(a));
    ctx.stroke();
  };
  needle(target.theta_deg, "#eab308", r - 10);
  if (snap) {
    needle(snap.theta_set_deg, COLORS.set, r - 4);
    needle(snap.theta_deg, COLORS.meas, r);
  }
}

export function renderText(refs: RenderRefs, snap: StateMsg | null,
                           stale: boolean, driftAlert: boolean,
                           status: string, role: string): void {
  refs.statusEl.textContent = role ? `${status} (${role})` : status;
  refs.statusEl.className = status === "connected" ? "ok" : "bad";

  const flags: string[] = [];
  if (stale) flags.push("STALE STREAM");
  if (snap?.latency.violation) flags.push("LATENCY > 500 ms");
  if (snap && snap.calibrating.length) {
    flags.push(`calibrating: ${snap.calibrating.join(",")}`);
  }
  refs.flagsEl.textContent = flags.join("  |  ");
  refs.flagsEl.className = flags.length ? "bad" : "";

  refs.calibrateBtn.classList.toggle("alert", driftAlert);

  if (!snap) {
    refs.readoutEl.textContent = "waiting for state…";
    return;
  }
  const rows = (["x", "y", "z"] as const).map((a) => {
    const ax = snap.axes[a];
    return `${a}: set ${ax.set_mm.toFixed(1)}  meas ${ax.meas_mm.toFixed(1)}  ` +
      `true ${ax.true_mm.toFixed(1)} mm  Va ${ax.va_v.toFixed(2)} V  ` +
      `pwm ${ax.pwm ? "on" : "OFF"}  drift ${ax.drift_mm.toFixed(2)} mm` +
      (ax.clamped ? "  [clamped]" : "");
  });
  rows.push(
    `theta: ${snap.theta_deg.toFixed(1)} deg (target ${snap.theta_set_deg.toFixed(1)})`,
    `cmd delay ${snap.latency.last_cmd_delay_ms.toFixed(0)} ms ` +
      `(base ${snap.latency.base_ms} + jitter ${snap.latency.jitter_ms})`,
  );
  refs.readoutEl.textContent = rows.join("\n");
}

export function renderErrors(refs: RenderRefs, errors: string[]): void {
  refs.errorsEl.textContent = errors.slice(-4).join("\n");
}
