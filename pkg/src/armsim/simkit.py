"""Deterministic fixed-step closed-loop simulation and analysis.

Reference signal generators, the teleoperation latency channel, the
closed-loop runner (delegating the hot loop to the compiled kernel when
available) and extraction of the scalar performance metrics.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernel
from .plant import V_EPS, AxisParams, DerivedConstants, PlantState, derive_constants
from .controller import PIGains

SIGNAL_KINDS = ("step", "ramp", "sine", "tri")

LATENCY_LIMIT_MS = 500.0  # end-to-end command delay the operator can compensate


class ConfigError(ValueError):
    """Invalid simulation configuration."""


@dataclass(frozen=True)
class SimConfig:
    dt_plant: float = 1e-4
    dt_ctrl: float = 1e-3
    dt_sensor: float = 1e-2
    duration: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.dt_plant <= self.dt_ctrl <= self.dt_sensor:
            raise ConfigError("need 0 < dt_plant <= dt_ctrl <= dt_sensor")
        for name, period in (("dt_ctrl", self.dt_ctrl), ("dt_sensor", self.dt_sensor)):
            ratio = period / self.dt_plant
            if abs(ratio - round(ratio)) > 1e-9:
                raise ConfigError(f"{name} must be an integer multiple of dt_plant")
        ratio = self.dt_sensor / self.dt_ctrl
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("dt_sensor must be an integer multiple of dt_ctrl")
        if self.duration <= 0.0:
            raise ConfigError("duration must be > 0")

    @property
    def substeps(self) -> int:
        return round(self.dt_ctrl / self.dt_plant)

    @property
    def sensor_every(self) -> int:
        return round(self.dt_sensor / self.dt_ctrl)


@dataclass(frozen=True)
class SignalSpec:
    """A reference trajectory: center + gen_signal(kind, ...) from onset on.

    active_s freezes the waveform at its final value after that many
    seconds, giving endurance runs a settle tail before metrics are taken.
    """

    kind: str
    amplitude: float = 0.0
    freq: float = 0.0
    slope: float = 0.0
    center: float = 0.0
    onset: float = 0.0
    active_s: float | None = None

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ConfigError(f"unknown signal kind {self.kind!r}")
        for name in ("amplitude", "freq", "slope", "center", "onset"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"signal {name} must be finite")
        if self.kind in ("sine", "tri") and self.freq <= 0.0:
            raise ConfigError(f"{self.kind} signal needs freq > 0")


def gen_signal(kind: str, amplitude: float, freq: float, slope: float,
               t: float) -> float:
    """Pointwise value of the raw reference waveform at time t >= 0.

    tri is the unit triangle wave: period 1/freq, range [-1, 1], zero at
    t = 0, peak at the quarter period.  A ramp rises at `slope` and holds
    once it reaches `amplitude` (uncapped when amplitude is 0).
    """
    if kind == "step":
        return amplitude
    if kind == "ramp":
        v = slope * t
        if amplitude != 0.0:
            if slope >= 0.0:
                return min(v, amplitude)
            return max(v, amplitude)
        return v
    if kind == "sine":
        return amplitude * math.sin(2.0 * math.pi * freq * t)
    if kind == "tri":
        phase = freq * t
        ph = phase - math.floor(phase)
        if ph < 0.25:
            unit = 4.0 * ph
        elif ph < 0.75:
            unit = 2.0 - 4.0 * ph
        else:
            unit = 4.0 * ph - 4.0
        return amplitude * unit
    raise ConfigError(f"unknown signal kind {kind!r}")


def signal_value(sig: SignalSpec, t: float) -> float:
    tau = t - sig.onset
    if tau < 0.0:
        return sig.center  # waveform not started yet
    if sig.active_s is not None and tau > sig.active_s:
        tau = sig.active_s  # hold the final value through the settle tail
    return sig.center + gen_signal(sig.kind, sig.amplitude, sig.freq, sig.slope, tau)


class LatencyChannel:
    """Ordered delayed delivery of timestamped messages.

    Each message is delivered exactly once at send time + delay, with the
    delay drawn uniformly from [base, base + jitter] milliseconds.  Delivery
    times are forced non-decreasing, which preserves send order and never
    pushes a delay above base + jitter (the later send time absorbs the
    bump).  Tracks the worst observed delay against the 500 ms operability
    limit.
    """

    def __init__(self, base_ms: float = 0.0, jitter_ms: float = 0.0, seed: int = 0):
        if base_ms < 0.0 or jitter_ms < 0.0:
            raise ConfigError("latency must be non-negative")
        self.base_ms = base_ms
        self.jitter_ms = jitter_ms
        self._rng = np.random.default_rng(seed)
        self._queue: deque = deque()
        self._last_delivery = -math.inf
        self.sent = 0
        self.delivered = 0
        self.max_delay_ms = 0.0

    def send(self, msg, now: float) -> float:
        """Queue msg at simulation time `now` (s); returns the delivery time."""
        delay_s = (self.base_ms + self._rng.random() * self.jitter_ms) * 1e-3
        deliver_at = now + delay_s
        if deliver_at < self._last_delivery:
            deliver_at = self._last_delivery
        self._last_delivery = deliver_at
        self._queue.append((deliver_at, now, msg))
        self.sent += 1
        delay_ms = (deliver_at - now) * 1e3
        if delay_ms > self.max_delay_ms:
            self.max_delay_ms = delay_ms
        return deliver_at

    def poll(self, now: float) -> list:
        """All messages due by `now`, in send order, as (msg, sent_at, delivered_at)."""
        out = []
        while self._queue and self._queue[0][0] <= now:
            deliver_at, sent_at, msg = self._queue.popleft()
            out.append((msg, sent_at, deliver_at))
        self.delivered += len(out)
        return out

    @property
    def pending(self) -> int:
        return len(self._queue)

    @property
    def violation(self) -> bool:
        return self.max_delay_ms > LATENCY_LIMIT_MS


@dataclass
class Trace:
    """Time series of one closed-loop experiment for a single axis."""

    axis: str
    t: np.ndarray
    setpoint: np.ndarray
    true_pos: np.ndarray
    measured: np.ndarray
    va: np.ndarray
    pwm: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)


CSV_HEADER = "t_s,axis,setpoint_m,true_m,measured_m,va_V,pwm_on"


def write_trace_csv(path, traces) -> None:
    """Write traces in the canonical CSV schema (byte-stable given equal inputs)."""
    if isinstance(traces, Trace):
        traces = [traces]
    with open(path, "w") as f:
        f.write(CSV_HEADER + "\n")
        for tr in traces:
            for i in range(len(tr)):
                f.write(f"{float(tr.t[i])!r},{tr.axis},{float(tr.setpoint[i])!r},"
                        f"{float(tr.true_pos[i])!r},{float(tr.measured[i])!r},"
                        f"{float(tr.va[i])!r},{int(tr.pwm[i])}\n")


def read_trace_csv(path) -> dict[str, Trace]:
    """Inverse of write_trace_csv; returns {axis: Trace} without meta."""
    rows: dict[str, list] = {}
    with open(path) as f:
        header = f.readline().strip()
        if header != CSV_HEADER:
            raise ConfigError(f"unexpected trace header {header!r}")
        for line in f:
            t_s, axis, sp, true_m, meas, va, pwm = line.strip().split(",")
            rows.setdefault(axis, []).append(
                (float(t_s), float(sp), float(true_m), float(meas),
                 float(va), float(pwm)))
    out = {}
    for axis, data in rows.items():
        arr = np.asarray(data)
        out[axis] = Trace(axis, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3],
                          arr[:, 4], arr[:, 5])
    return out


@dataclass(frozen=True)
class Metrics:
    """Scalar performance figures of one experiment (NaN where undefined)."""

    rise_time_s: float = math.nan
    overshoot_pct: float = math.nan
    settle2_s: float = math.nan
    ss_error_mm: float = math.nan
    deadzone_time_s: float = math.nan
    offset_error_mm: float = math.nan
    displacement_m: float = math.nan
    error_pct: float = math.nan

    def as_dict(self) -> dict:
        return {
            "rise_time_s": self.rise_time_s,
            "overshoot_pct": self.overshoot_pct,
            "settle2_s": self.settle2_s,
            "ss_error_mm": self.ss_error_mm,
            "deadzone_time_s": self.deadzone_time_s,
            "offset_error_mm": self.offset_error_mm,
            "displacement_m": self.displacement_m,
            "error_pct": self.error_pct,
        }


@dataclass
class AxisLoopState:
    """Carried kernel state, so a loop can be advanced chunk by chunk."""

    pos: float
    vel: float = 0.0
    integral: float = 0.0
    in_band: float = 0.0
    pwm_on: int = 1
    counts: int = 0
    last_index: int = 0
    last_dir: int = 0
    leg_sum: float = 0.0
    leg_ticks: int = 0
    leg_path: float = 0.0
    last_pos: float = 0.0
    prev_short: int = 0
    drops_total: int = 0
    home_offset: float = 0.0
    measured: float = 0.0
    tick: int = 0
    clamp_events: int = 0

    @classmethod
    def at_rest(cls, pos: float):
        # encoder homed at the starting position
        return cls(pos=pos, home_offset=pos, measured=pos, last_pos=pos)

    def as_tuple(self):
        return (self.pos, self.vel, self.integral, self.in_band, self.pwm_on,
                self.counts, self.last_index, self.last_dir, self.leg_sum,
                self.leg_ticks, self.leg_path, self.last_pos, self.prev_short,
                self.drops_total, self.home_offset, self.measured, self.tick,
                self.clamp_events)

    @classmethod
    def from_tuple(cls, tup):
        return cls(*tup)

    @property
    def drift(self) -> float:
        """True position minus encoder reading, m."""
        return self.pos - self.measured


def advance_axis(p: AxisParams, dc: DerivedConstants, gains: PIGains,
                 band: float, gate_delay: float, kappa: float,
                 sim: SimConfig, state: AxisLoopState,
                 sp: np.ndarray, stroke_limit: float = 0.25) -> tuple[AxisLoopState, dict]:
    """Run len(sp) control ticks from `state`, returning new state + columns."""
    n = len(sp)
    out_true = np.empty(n)
    out_meas = np.empty(n)
    out_va = np.empty(n)
    out_pwm = np.empty(n)
    resolution = p.l / 4.0
    end = kernel.run_axis_ticks(
        dc.K1, dc.K2, dc.K3 * p.g_input, V_EPS, p.V_deadzone,
        p.travel_min, p.travel_max,
        gains.Kp, gains.Ki, gains.i_clamp, gains.V_sat, band, gate_delay,
        resolution, kappa, stroke_limit,
        sim.dt_plant, sim.dt_ctrl, sim.substeps, sim.sensor_every,
        *state.as_tuple(),
        np.ascontiguousarray(sp, dtype=np.float64),
        out_true, out_meas, out_va, out_pwm,
    )
    new_state = AxisLoopState.from_tuple(end)
    return new_state, {"true": out_true, "measured": out_meas,
                       "va": out_va, "pwm": out_pwm}


def build_setpoints(sig: SignalSpec, sim: SimConfig,
                    latency: LatencyChannel | None = None) -> np.ndarray:
    """Per-control-tick setpoints, optionally passed through a latency channel."""
    n = round(sim.duration / sim.dt_ctrl)
    raw = np.empty(n)
    for k in range(n):
        raw[k] = signal_value(sig, k * sim.dt_ctrl)
    if latency is None:
        return raw
    applied = np.empty(n)
    current = signal_value(sig, 0.0)
    for k in range(n):
        now = k * sim.dt_ctrl
        latency.send(raw[k], now)
        for value, _, _ in latency.poll(now):
            current = value
        applied[k] = current
    return applied


def run_closed_loop(p: AxisParams, gains: PIGains, sig: SignalSpec,
                    sim: SimConfig, band: float = 1e-3, gate_delay: float = 5.0,
                    kappa: float = 0.0, stroke_limit: float = 0.25,
                    start_pos: float | None = None,
                    latency: LatencyChannel | None = None,
                    dc: DerivedConstants | None = None) -> Trace:
    """Simulate one axis tracking a reference signal.

    The carrier starts at rest at the signal's initial value unless
    start_pos is given; the encoder is homed there.  Travel-limit hits are
    recorded in meta, not fatal.
    """
    dc = dc or derive_constants(p)
    if start_pos is None:
        start_pos = sig.center  # pre-onset value of every waveform
    start_pos = min(max(start_pos, p.travel_min), p.travel_max)
    sp = build_setpoints(sig, sim, latency)
    state = AxisLoopState.at_rest(start_pos)
    state, cols = advance_axis(p, dc, gains, band, gate_delay, kappa, sim,
                               state, sp, stroke_limit)
    n = len(sp)
    t = np.arange(n) * sim.dt_ctrl
    meta = {
        "kind": sig.kind, "amplitude": sig.amplitude, "freq": sig.freq,
        "slope": sig.slope, "center": sig.center, "onset": sig.onset,
        "active_s": sig.active_s, "seed": sim.seed,
        "clamp_events": state.clamp_events, "drops_total": state.drops_total,
        "drift_end_m": state.drift, "backend": kernel.BACKEND,
    }
    if latency is not None:
        meta["max_delay_ms"] = latency.max_delay_ms
        meta["latency_violation"] = latency.violation
    return Trace(p.name, t, sp, cols["true"], cols["measured"], cols["va"],
                 cols["pwm"], meta)


def homed_state(state: AxisLoopState, switch_pos: float) -> AxisLoopState:
    """Encoder re-referenced at the calibration switch; drift zeroed.

    The carrier must physically sit at the switch.  The controller is also
    reset so a stale integral cannot kick the freshly homed axis.
    """
    return replace(state, counts=0, last_index=0, last_dir=0, leg_sum=0.0,
                   leg_ticks=0, leg_path=0.0, last_pos=state.pos,
                   prev_short=0, drops_total=0, home_offset=switch_pos,
                   measured=switch_pos, integral=0.0, in_band=0.0, pwm_on=1)


def drive_home(p: AxisParams, dc: DerivedConstants, gains: PIGains,
               sim: SimConfig, state: AxisLoopState, band: float = 1e-3,
               gate_delay: float = 5.0, kappa: float = 0.0,
               stroke_limit: float = 0.25,
               timeout_s: float = 20.0) -> AxisLoopState:
    """Drive to the low-travel calibration switch and re-home the encoder.

    The commanded point sits below the switch so the drive saturates into
    the travel clamp, which is the physical hard stop at the switch; the
    encoder is then re-referenced there regardless of accumulated drift.
    """
    target = p.travel_min - 0.05
    chunk = max(1, round(0.05 / sim.dt_ctrl))
    sp = np.full(chunk, target)
    elapsed = 0.0
    while elapsed < timeout_s:
        state, _ = advance_axis(p, dc, gains, band, gate_delay, kappa, sim,
                                state, sp, stroke_limit)
        elapsed += chunk * sim.dt_ctrl
        if state.pos <= p.travel_min + 1e-9 and abs(state.vel) < 1e-3:
            return homed_state(state, p.travel_min)
    raise RuntimeError(f"{p.name}: switch not reached within {timeout_s} s")


def integrate_open_loop(p: AxisParams, dc: DerivedConstants, state: PlantState,
                        Va: float, duration: float, dt: float) -> PlantState:
    """Fixed-step RK4 of the plant under constant drive (no controller)."""
    n = round(duration / dt)
    pos, vel = state.pos, state.vel
    half_h = 0.5 * dt
    sixth_h = dt / 6.0
    K1, K2, K3g = dc.K1, dc.K2, dc.K3 * p.g_input
    for _ in range(n):
        if abs(vel) < V_EPS and abs(Va) < p.V_deadzone:
            vel = 0.0
        else:
            a1 = (Va - K1 * vel - K3g) / K2
            v2 = vel + half_h * a1
            a2 = (Va - K1 * v2 - K3g) / K2
            v3 = vel + half_h * a2
            a3 = (Va - K1 * v3 - K3g) / K2
            v4 = vel + dt * a3
            a4 = (Va - K1 * v4 - K3g) / K2
            pos = pos + sixth_h * (vel + 2.0 * v2 + 2.0 * v3 + v4)
            vel = vel + sixth_h * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            if pos < p.travel_min:
                pos = p.travel_min
                if vel < 0.0:
                    vel = 0.0
            elif pos > p.travel_max:
                pos = p.travel_max
                if vel > 0.0:
                    vel = 0.0
    return PlantState(pos=pos, vel=vel, t=state.t + n * dt)


def _count_change_times(trace: Trace) -> np.ndarray:
    changed = np.flatnonzero(np.diff(trace.measured) != 0.0) + 1
    return trace.t[changed]


def _setpoint_reversal_times(trace: Trace) -> np.ndarray:
    """Times where the commanded velocity flips sign (waveform apexes)."""
    kind = trace.meta.get("kind")
    freq = trace.meta.get("freq") or 0.0
    onset = trace.meta.get("onset") or 0.0
    if kind not in ("sine", "tri") or freq <= 0.0:
        return np.array([])
    active = trace.meta.get("active_s")
    t_end = onset + active if active is not None else trace.t[-1]
    half = 0.5 / freq
    times = []
    k = 0
    while True:
        T = onset + 0.25 / freq + k * half
        if T >= t_end:
            break
        times.append(T)
        k += 1
    return np.asarray(times)


def compute_metrics(trace: Trace) -> Metrics:
    """Extract the scalar performance figures from one trace.

    Step-only quantities (rise time, overshoot, settling) are NaN for
    non-step traces; deadzone time is the onset-to-first-count delay for a
    step and the mean stationary dwell spanning each commanded reversal for
    periodic signals.
    """
    kind = trace.meta.get("kind")
    amplitude = trace.meta.get("amplitude", 0.0)
    center = trace.meta.get("center", 0.0)
    onset = trace.meta.get("onset", 0.0)
    sp = trace.setpoint
    y = trace.true_pos
    t = trace.t

    rise = overshoot = settle2 = math.nan
    if kind == "step" and amplitude != 0.0:
        rel = (y - center) / amplitude  # 0 -> 1 regardless of step sign
        after = t >= onset
        idx10 = np.flatnonzero(after & (rel >= 0.1))
        idx90 = np.flatnonzero(after & (rel >= 0.9))
        if len(idx10) and len(idx90):
            rise = float(t[idx90[0]] - t[idx10[0]])
        final = rel[-1]
        overshoot = float((np.max(rel[after]) - final) * 100.0)
        band = 0.02 * abs(amplitude)
        outside = np.flatnonzero(after & (np.abs(y - sp) > band))
        if len(outside) == 0:
            settle2 = 0.0
        elif outside[-1] + 1 < len(t):
            settle2 = float(t[outside[-1] + 1] - onset)
        else:
            settle2 = math.inf  # never settles inside the trace

    tail = max(1, int(0.2 * len(t)))
    ss_error_mm = float(np.mean(np.abs(sp[-tail:] - y[-tail:]))) * 1e3

    changes = _count_change_times(trace)
    deadzone = math.nan
    if kind == "step":
        after = changes[changes >= onset]
        deadzone = float(after[0] - onset) if len(after) else math.inf
    else:
        reversals = _setpoint_reversal_times(trace)
        freq = trace.meta.get("freq") or 0.0
        if len(reversals) and len(changes) >= 2 and freq > 0.0:
            half = 0.5 / freq
            dwells = []
            for T in reversals:
                lo = np.searchsorted(changes, T)
                # gaps between consecutive count changes overlapping
                # [T, T + half/2]; the dwell is the longest one
                best = 0.0
                i = max(lo - 1, 0)
                while i + 1 < len(changes) and changes[i] <= T + 0.5 * half:
                    if changes[i + 1] >= T:
                        best = max(best, changes[i + 1] - changes[i])
                    i += 1
                if best > 0.0:
                    dwells.append(best)
            if dwells:
                deadzone = float(np.mean(dwells))

    offset_mm = float(abs(sp[-1] - y[-1])) * 1e3
    # commanded path length: what the endurance tables normalise offset by
    # (every axis reports the same displacement for the same waveform)
    displacement = float(np.sum(np.abs(np.diff(sp))))
    error_pct = 100.0 * (offset_mm * 1e-3) / displacement if displacement > 0 else math.nan

    return Metrics(rise_time_s=rise, overshoot_pct=overshoot, settle2_s=settle2,
                   ss_error_mm=ss_error_mm, deadzone_time_s=deadzone,
                   offset_error_mm=offset_mm, displacement_m=displacement,
                   error_pct=error_pct)
