// Console wiring: pointer/scroll/knob steering in, 50 Hz coalesced target
// stream out, state snapshots rendered per animation frame.

import { applyScrollDetent, pointerToWorkspace, snapTheta, TargetCoalescer } from "./mapping.js";
import { encodeCalibrate, encodeSetLatency, encodeTarget } from "./protocol.js";
import { Store } from "./store.js";
import { TeleopSocket } from "./socket.js";
import { drawThetaDial, drawTopDown, drawZGauge, renderErrors, renderText, RenderRefs } from "./render.js";

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

const refs: RenderRefs = {
  canvas: $("xy"),
  zGauge: $("zgauge"),
  thetaDial: $("dial"),
  statusEl: $("status"),
  flagsEl: $("flags"),
  readoutEl: $("readout"),
  calibrateBtn: $("calibrate"),
  errorsEl: $("errors"),
};

const store = new Store();
const url = `ws://${location.host}/teleop`;
const socket = new TeleopSocket(url, store);
socket.connect();

const coalescer = new TargetCoalescer(50);
let seq = 0;

function pushTarget(): void {
  const pose = coalescer.offer({ ...store.state.target }, performance.now());
  if (pose) send(pose);
}

function send(pose: typeof store.state.target): void {
  socket.send(encodeTarget(pose, ++seq));
}

// pointer steering on the x/y plane (only while the button is held)
let steering = false;
refs.canvas.addEventListener("pointerdown", (ev) => {
  steering = true;
  refs.canvas.setPointerCapture(ev.pointerId);
  steer(ev);
});
refs.canvas.addEventListener("pointermove", (ev) => steering && steer(ev));
refs.canvas.addEventListener("pointerup", () => (steering = false));

function steer(ev: PointerEvent): void {
  const hello = store.state.hello;
  if (!hello || store.state.role !== "operator") return;
  const rect = refs.canvas.getBoundingClientRect();
  const { x_mm, y_mm } = pointerToWorkspace(
    ev.clientX - rect.left, ev.clientY - rect.top, rect.width, rect.height,
    { min: hello.bounds_mm.x[0], max: hello.bounds_mm.x[1] },
    { min: hello.bounds_mm.y[0], max: hello.bounds_mm.y[1] });
  store.state.target.x_mm = x_mm;
  store.state.target.y_mm = y_mm;
  pushTarget();
}

// z on scroll with 1 mm detents
refs.canvas.addEventListener("wheel", (ev) => {
  const hello = store.state.hello;
  if (!hello) return;
  ev.preventDefault();
  store.state.target.z_mm = applyScrollDetent(
    store.state.target.z_mm, ev.deltaY,
    { min: hello.bounds_mm.z[0], max: hello.bounds_mm.z[1] });
  pushTarget();
}, { passive: false });

// roll knob snapped to one stepper step
const knob = $("theta") as unknown as HTMLInputElement;
knob.addEventListener("input", () => {
  const step = store.state.hello?.theta_step_deg ?? 1.5;
  store.state.target.theta_deg = snapTheta(Number(knob.value), step);
  pushTarget();
});

// latency sliders apply on release
for (const id of ["lat-base", "lat-jitter"]) {
  $(id).addEventListener("change", () => {
    const base = Number(($("lat-base") as unknown as HTMLInputElement).value);
    const jitter = Number(($("lat-jitter") as unknown as HTMLInputElement).value);
    store.state.latencyBase = base;
    store.state.latencyJitter = jitter;
    $("lat-label").textContent = `${base} ms +${jitter}`;
    socket.send(encodeSetLatency(base, jitter));
  });
}

refs.calibrateBtn.addEventListener("click", () => {
  socket.send(encodeCalibrate(++seq));
});

function frame(): void {
  store.drain();
  const nowMs = performance.now();
  const deferred = coalescer.take<typeof store.state.target>(nowMs);
  if (deferred) send(deferred);
  const hello = store.state.hello;
  if (hello) {
    drawTopDown(refs, hello, store.state.snapshot, store.state.target);
    drawZGauge(refs, hello, store.state.snapshot, store.state.target);
  }
  drawThetaDial(refs, store.state.snapshot, store.state.target);
  renderText(refs, store.state.snapshot, store.isStale(nowMs),
             store.driftAlert(), store.state.status, store.state.role);
  renderErrors(refs, store.state.errors);
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
