// Wire schema of the /teleop endpoint. The console is a pure client:
// every displayed number comes from a `state` field, nothing is simulated
// client-side.

export interface AxisState {
  set_mm: number;
  meas_mm: number;
  true_mm: number;
  va_v: number;
  pwm: number;
  drift_mm: number;
  clamped: boolean;
}

export interface LatencyInfo {
  base_ms: number;
  jitter_ms: number;
  last_cmd_delay_ms: number;
  max_delay_ms: number;
  violation: boolean;
}

export interface StateMsg {
  type: "state";
  t_ms: number;
  axes: { x: AxisState; y: AxisState; z: AxisState };
  theta_deg: number;
  theta_set_deg: number;
  calibrating: string[];
  latency: LatencyInfo;
}

export interface HelloMsg {
  type: "hello";
  role: "operator" | "observer";
  bounds_mm: { x: [number, number]; y: [number, number]; z: [number, number] };
  tick_hz: number;
  state_hz: number;
  theta_step_deg: number;
  latency_limit_ms: number;
}

export interface AckMsg {
  type: "ack";
  op: string;
  [key: string]: unknown;
}

export interface ErrorMsg {
  type: "error";
  message: string;
}

export type ServerMsg = StateMsg | HelloMsg | AckMsg | ErrorMsg;

export interface TargetPose {
  x_mm: number;
  y_mm: number;
  z_mm: number;
  theta_deg: number;
}

const AXIS_KEYS: (keyof StateMsg["axes"])[] = ["x", "y", "z"];

export function parseServerMsg(text: string): ServerMsg | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const msg = raw as Record<string, unknown>;
  switch (msg.type) {
    case "hello":
    case "ack":
    case "error":
      return msg as unknown as ServerMsg;
    case "state": {
      const axes = msg.axes as Record<string, unknown> | undefined;
      if (!axes || !AXIS_KEYS.every((k) => typeof axes[k] === "object")) {
        return null;
      }
      return msg as unknown as StateMsg;
    }
    default:
      return null;
  }
}

export function encodeTarget(pose: TargetPose, t_ms: number): string {
  return JSON.stringify({
    type: "target",
    t_ms,
    x_mm: pose.x_mm,
    y_mm: pose.y_mm,
    z_mm: pose.z_mm,
    theta_deg: pose.theta_deg,
  });
}

export function encodeSetLatency(base_ms: number, jitter_ms: number): string {
  return JSON.stringify({ type: "set_latency", base_ms, jitter_ms });
}

export function encodeCalibrate(t_ms: number): string {
  return JSON.stringify({ type: "calibrate", t_ms });
}
