"""Live teleoperation service.

Runs the closed-loop simulation in real time, takes operator target poses
through the latency channel, broadcasts state snapshots at 50 Hz and
services calibration requests.  One operator session at a time; additional
connections observe.

Wire format: JSON messages, one per line in raw TCP mode or one per text
frame on the `/teleop` websocket.  Inbound types: `target`, `calibrate`,
`set_latency`.  Outbound: `hello`, `state`, `ack`, `error`.  See the wire
schema section of the README for the exact field inventory.

Concurrency: network readers push parsed commands onto the core through
the single event loop; the tick task alone owns the simulation state and
publishes immutable snapshot dicts to per-connection outbound queues.
"""

import asyncio
import json
import logging
import math
import time

import numpy as np

from .experiments import ExperimentConfig
from .plant import StepperState, quantize_theta, stepper_update
from .simkit import (LATENCY_LIMIT_MS, AxisLoopState, LatencyChannel,
                     advance_axis, homed_state)

log = logging.getLogger("armsim.teleop")

AXES = ("x", "y", "z")
TICK_CHUNK_S = 0.005      # wall period of the tick task
STATE_PERIOD_S = 0.02     # 50 Hz snapshot broadcast
MAX_CATCHUP_TICKS = 5     # beyond one chunk; excess sim time is dropped
CALIBRATE_DRIVE_BELOW_M = 0.05  # internal homing setpoint below the switch


class TeleopCore:
    """Owns the simulated arm and applies the command stream in order."""

    def __init__(self, cfg: ExperimentConfig, base_ms: float = 0.0,
                 jitter_ms: float = 0.0):
        self.cfg = cfg
        self.dt = cfg.sim.dt_ctrl
        self.derived = {a: cfg.derived(a) for a in AXES}
        mid = {a: 0.5 * (cfg.axes[a].travel_min + cfg.axes[a].travel_max)
               for a in AXES}
        self.state = {a: AxisLoopState.at_rest(mid[a]) for a in AXES}
        self.setpoint = dict(mid)
        self.clamped = {a: False for a in AXES}
        self.last_va = {a: 0.0 for a in AXES}
        self.last_pwm = {a: 1 for a in AXES}
        self.stepper = StepperState()
        self.theta_target = 0.0
        self.channel = LatencyChannel(base_ms, jitter_ms, seed=cfg.sim.seed)
        self.tick = 0
        self.calibrating: set[str] = set()
        self.last_target_ms = -math.inf
        self.last_cmd_delay_ms = 0.0
        self.stale_targets = 0

    @property
    def now(self) -> float:
        return self.tick * self.dt

    def handle_message(self, msg: dict, role: str) -> list[dict]:
        """Apply one inbound command; returns reply messages."""
        mtype = msg.get("type")
        if mtype == "target":
            if role != "operator":
                return [_err("observers cannot steer")]
            return self._queue_target(msg)
        if mtype == "calibrate":
            if role != "operator":
                return [_err("observers cannot calibrate")]
            self.calibrating = set(AXES)
            return [{"type": "ack", "op": "calibrate"}]
        if mtype == "set_latency":
            if role != "operator":
                return [_err("observers cannot change latency")]
            try:
                base = float(msg["base_ms"])
                jitter = float(msg.get("jitter_ms", 0.0))
                if base < 0.0 or jitter < 0.0:
                    raise ValueError
            except (KeyError, TypeError, ValueError):
                return [_err("set_latency needs base_ms >= 0 (and jitter_ms >= 0)")]
            self.channel.base_ms = base
            self.channel.jitter_ms = jitter
            return [{"type": "ack", "op": "set_latency",
                     "base_ms": base, "jitter_ms": jitter}]
        return [_err(f"unknown message type {mtype!r}")]

    def _queue_target(self, msg: dict) -> list[dict]:
        try:
            t_ms = float(msg["t_ms"])
        except (KeyError, TypeError, ValueError):
            return [_err("target needs a numeric t_ms")]
        if t_ms <= self.last_target_ms:
            self.stale_targets += 1
            return [_err(f"stale target t_ms={t_ms:.0f} dropped")]
        self.last_target_ms = t_ms
        sp = {}
        clamped = {}
        for axis in AXES:
            key = f"{axis}_mm"
            if key not in msg:
                continue
            try:
                value = float(msg[key]) * 1e-3
            except (TypeError, ValueError):
                return [_err(f"target field {key} must be a number")]
            p = self.cfg.axes[axis]
            bounded = min(max(value, p.travel_min), p.travel_max)
            clamped[axis] = bounded != value
            sp[axis] = bounded
        theta = None
        if "theta_deg" in msg:
            try:
                theta = float(msg["theta_deg"])
            except (TypeError, ValueError):
                return [_err("target field theta_deg must be a number")]
        self.channel.send({"sp": sp, "clamped": clamped, "theta": theta},
                          self.now)
        return []

    def advance(self, n_ticks: int) -> None:
        """Run n control ticks, applying channel deliveries tick-exactly."""
        if n_ticks <= 0:
            return
        t0 = self.now
        sp_arrays = {a: np.full(n_ticks, self.setpoint[a]) for a in AXES}
        for payload, sent_at, deliver_at in self.channel.poll(t0 + n_ticks * self.dt):
            idx = max(0, math.ceil((deliver_at - t0) / self.dt - 1e-9))
            applied_at = t0 + min(idx, n_ticks) * self.dt
            self.last_cmd_delay_ms = (applied_at - sent_at) * 1e3
            for axis, value in payload["sp"].items():
                self.setpoint[axis] = value
                self.clamped[axis] = payload["clamped"][axis]
                if idx < n_ticks:
                    sp_arrays[axis][idx:] = value
            if payload["theta"] is not None:
                self.theta_target = payload["theta"]
        for axis in self.calibrating:
            # drive open-loop-hard below the physical switch; the travel
            # clamp is the hard stop at the switch position
            sp_arrays[axis][:] = self.cfg.axes[axis].travel_min - CALIBRATE_DRIVE_BELOW_M
        for axis in AXES:
            st, cols = advance_axis(
                self.cfg.axes[axis], self.derived[axis], self.cfg.gains,
                self.cfg.band, self.cfg.gate_delay, self.cfg.kappa,
                self.cfg.sim, self.state[axis], sp_arrays[axis],
                self.cfg.stroke_limit)
            self.state[axis] = st
            self.last_va[axis] = float(cols["va"][-1])
            self.last_pwm[axis] = int(cols["pwm"][-1])
        self.stepper = stepper_update(self.stepper, self.theta_target,
                                      n_ticks * self.dt)
        self.tick += n_ticks
        for axis in list(self.calibrating):
            self._finish_homing(axis)

    def _finish_homing(self, axis: str) -> None:
        p = self.cfg.axes[axis]
        st = self.state[axis]
        if st.pos <= p.travel_min + 1e-9 and abs(st.vel) < 1e-3:
            self.state[axis] = homed_state(st, p.travel_min)
            self.setpoint[axis] = p.travel_min
            self.clamped[axis] = False
            self.calibrating.discard(axis)
            log.info("axis %s homed at switch %.3f m", axis, p.travel_min)

    def snapshot(self) -> dict:
        axes = {}
        for axis in AXES:
            st = self.state[axis]
            axes[axis] = {
                "set_mm": self.setpoint[axis] * 1e3,
                "meas_mm": st.measured * 1e3,
                "true_mm": st.pos * 1e3,
                "va_v": self.last_va[axis],
                "pwm": self.last_pwm[axis],
                "drift_mm": (st.pos - st.measured) * 1e3,
                "clamped": self.clamped[axis],
            }
        return {
            "type": "state",
            "t_ms": self.now * 1e3,
            "axes": axes,
            "theta_deg": self.stepper.theta,
            "theta_set_deg": quantize_theta(self.theta_target,
                                            self.stepper.step_size),
            "calibrating": sorted(self.calibrating),
            "latency": {
                "base_ms": self.channel.base_ms,
                "jitter_ms": self.channel.jitter_ms,
                "last_cmd_delay_ms": self.last_cmd_delay_ms,
                "max_delay_ms": self.channel.max_delay_ms,
                "violation": self.channel.violation,
            },
        }

    def hello(self, role: str) -> dict:
        bounds = {a: [self.cfg.axes[a].travel_min * 1e3,
                      self.cfg.axes[a].travel_max * 1e3] for a in AXES}
        return {"type": "hello", "role": role, "bounds_mm": bounds,
                "tick_hz": 1.0 / self.dt, "state_hz": 1.0 / STATE_PERIOD_S,
                "theta_step_deg": self.stepper.step_size,
                "latency_limit_ms": LATENCY_LIMIT_MS}


def _err(message: str) -> dict:
    return {"type": "error", "message": message}


class TeleopServer:
    """Transport-agnostic session registry + the real-time tick task."""

    def __init__(self, cfg: ExperimentConfig, base_ms: float = 0.0,
                 jitter_ms: float = 0.0, tick_scale: float = 1.0):
        self.core = TeleopCore(cfg, base_ms, jitter_ms)
        self.tick_scale = tick_scale
        self.queues: dict[object, asyncio.Queue] = {}
        self.operator: object | None = None
        self.dropped_snapshots = 0
        self.bound_port: int | None = None  # set once a transport binds

    def register(self, key) -> tuple[str, asyncio.Queue]:
        role = "operator" if self.operator is None else "observer"
        if role == "operator":
            self.operator = key
        q: asyncio.Queue = asyncio.Queue(maxsize=128)
        self.queues[key] = q
        q.put_nowait(self.core.hello(role))
        return role, q

    def unregister(self, key) -> None:
        self.queues.pop(key, None)
        if self.operator is key:
            # arm holds the last setpoint; the next connection may steer
            self.operator = None

    def submit(self, key, text: str) -> None:
        q = self.queues.get(key)
        if q is None:
            return
        try:
            msg = json.loads(text)
            if not isinstance(msg, dict):
                raise ValueError("not an object")
        except ValueError:
            self._offer(q, _err("malformed JSON message"))
            return
        role = "operator" if key is self.operator else "observer"
        for reply in self.core.handle_message(msg, role):
            self._offer(q, reply)

    def _offer(self, q: asyncio.Queue, msg: dict) -> None:
        try:
            q.put_nowait(msg)
        except asyncio.QueueFull:
            self.dropped_snapshots += 1

    def broadcast(self, msg: dict) -> None:
        for q in self.queues.values():
            self._offer(q, msg)

    async def tick_loop(self) -> None:
        """Wall-clock-locked simulation pacing plus the 50 Hz state stream.

        Each wake runs its elapsed-time share of control ticks plus at most
        MAX_CATCHUP_TICKS of standing backlog; backlog beyond that is
        dropped (and logged, rate-limited) rather than replayed as a lurch.
        """
        dt = self.core.dt
        last_wake = time.monotonic()
        backlog = 0
        dropped_total = 0
        last_drop_log = last_wake
        next_state = last_wake
        while True:
            await asyncio.sleep(TICK_CHUNK_S)
            now = time.monotonic()
            share = int((now - last_wake) * self.tick_scale / dt + 0.5)
            last_wake = now
            backlog += share
            run = min(backlog, share + MAX_CATCHUP_TICKS)
            if run > 0:
                self.core.advance(run)
            backlog -= run
            if backlog > MAX_CATCHUP_TICKS:
                dropped_total += backlog - MAX_CATCHUP_TICKS
                backlog = MAX_CATCHUP_TICKS
            if dropped_total and now - last_drop_log > 1.0:
                log.warning("tick task behind; dropped %d ticks so far",
                            dropped_total)
                last_drop_log = now
            if now >= next_state:
                self.broadcast(self.core.snapshot())
                next_state += STATE_PERIOD_S
                if now > next_state:  # missed whole periods: realign
                    next_state = now + STATE_PERIOD_S


async def run_raw_server(server: TeleopServer, host: str, port: int,
                         ready: asyncio.Event | None = None) -> None:
    """Newline-delimited JSON over TCP; used by headless tests."""

    async def handler(reader: asyncio.StreamReader,
                      writer: asyncio.StreamWriter) -> None:
        key = object()
        _, q = server.register(key)

        async def sender() -> None:
            while True:
                msg = await q.get()
                writer.write((json.dumps(msg) + "\n").encode())
                await writer.drain()

        send_task = asyncio.create_task(sender())
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                server.submit(key, line.decode(errors="replace").strip())
        finally:
            send_task.cancel()
            server.unregister(key)
            writer.close()

    tick_task = asyncio.create_task(server.tick_loop())
    srv = await asyncio.start_server(handler, host, port)
    server.bound_port = srv.sockets[0].getsockname()[1]
    if ready is not None:
        ready.set()
    try:
        async with srv:
            await srv.serve_forever()
    finally:
        tick_task.cancel()


def make_app(server: TeleopServer):
    """FastAPI app exposing /teleop plus the built operator console."""
    from pathlib import Path

    from fastapi import FastAPI, WebSocket, WebSocketDisconnect
    from fastapi.staticfiles import StaticFiles

    app = FastAPI(title="armsim teleoperation")

    @app.on_event("startup")
    async def _start() -> None:
        app.state.tick_task = asyncio.create_task(server.tick_loop())

    @app.on_event("shutdown")
    async def _stop() -> None:
        app.state.tick_task.cancel()

    @app.websocket("/teleop")
    async def teleop_ws(ws: WebSocket) -> None:
        await ws.accept()
        key = object()
        _, q = server.register(key)

        async def sender() -> None:
            while True:
                msg = await q.get()
                await ws.send_text(json.dumps(msg))

        send_task = asyncio.create_task(sender())
        try:
            while True:
                server.submit(key, await ws.receive_text())
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            server.unregister(key)

    dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if not dist.is_dir():
        dist = Path.cwd() / "frontend" / "dist"
    if dist.is_dir():
        app.mount("/", StaticFiles(directory=dist, html=True), name="console")
    return app


def serve(cfg: ExperimentConfig, host: str, port: int, base_ms: float = 0.0,
          jitter_ms: float = 0.0, raw: bool = False,
          tick_scale: float = 1.0) -> None:
    logging.basicConfig(level=logging.INFO)
    server = TeleopServer(cfg, base_ms, jitter_ms, tick_scale)
    if raw:
        log.info("raw teleop endpoint on %s:%d", host, port)
        asyncio.run(run_raw_server(server, host, port))
    else:
        import uvicorn

        log.info("websocket teleop endpoint on ws://%s:%d/teleop", host, port)
        uvicorn.run(make_app(server), host=host, port=port, log_level="warning")
