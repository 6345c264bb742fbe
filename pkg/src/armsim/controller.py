"""Per-axis PI position controller.

Plain proportional + clamped integrator (no derivative term), output
saturated at the supply voltage, with a PWM power gate that cuts the drive
after the error has stayed inside a small band long enough.  All axes run
identical gains.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class PIGains:
    Kp: float              # V/m
    Ki: float              # V/(m*s)
    i_clamp: float         # integrator magnitude limit, V
    V_sat: float           # output saturation, V

    def __post_init__(self):
        if self.Kp <= 0.0:
            raise ValueError(f"Kp must be > 0, got {self.Kp}")
        if self.Ki < 0.0:
            raise ValueError(f"Ki must be >= 0, got {self.Ki}")
        if not 0.0 < self.i_clamp <= self.V_sat:
            raise ValueError(
                f"need 0 < i_clamp <= V_sat, got {self.i_clamp} vs {self.V_sat}")


@dataclass(frozen=True)
class ControllerState:
    integral: float = 0.0      # accumulated integral term, V
    in_band_s: float = 0.0     # continuous time spent with |error| < band, s
    pwm_on: bool = True
    band: float = 1e-3         # error band for the power gate, m
    gate_delay: float = 5.0    # dwell before gating off, s


def pi_update(c: ControllerState, g: PIGains, setpoint: float, measured: float,
              dt: float) -> tuple[float, ControllerState]:
    """One controller step; returns (Va, next state).

    The integral candidate is clamped to +/-i_clamp, then conditional
    anti-windup suspends integration whenever the unclamped output is past
    the supply saturation with the error still pushing outward.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    e = setpoint - measured
    candidate = min(max(c.integral + g.Ki * e * dt, -g.i_clamp), g.i_clamp)
    unclamped = g.Kp * e + candidate
    if (unclamped > g.V_sat and e > 0.0) or (unclamped < -g.V_sat and e < 0.0):
        integral = c.integral
    else:
        integral = candidate
    if c.pwm_on:
        Va = min(max(g.Kp * e + integral, -g.V_sat), g.V_sat)
    else:
        Va = 0.0
    return Va, replace(c, integral=integral)


def power_gate_update(c: ControllerState, e: float, dt: float) -> ControllerState:
    """Advance the PWM power gate.

    The gate opens (PWM off, zero hold power) once |e| has stayed inside the
    band for the full dwell.  It re-asserts the first instant |e| leaves the
    band; the integral is zeroed on wake-up so a stale value cannot kick the
    carrier.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    if abs(e) < c.band:
        if not c.pwm_on:
            return c
        in_band = c.in_band_s + dt
        if in_band >= c.gate_delay:
            return replace(c, in_band_s=0.0, pwm_on=False)
        return replace(c, in_band_s=in_band)
    if not c.pwm_on:
        return replace(c, in_band_s=0.0, pwm_on=True, integral=0.0)
    return replace(c, in_band_s=0.0)
