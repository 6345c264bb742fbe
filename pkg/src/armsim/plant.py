"""Single-axis lead-screw plant driven by a brushed DC motor.

The carrier dynamics reduce to a first-order velocity law plus a static
friction gate:

    Va = K2 * accel + K1 * vel + K3 * g

where K1..K3 collapse the motor electrical constants and the screw
geometry.  A separate open-loop geared stepper turns the tool-roll angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

V_EPS = 1e-4  # m/s, below this the carrier counts as at rest


class ParameterError(ValueError):
    """Physically inconsistent axis parameters."""


@dataclass(frozen=True)
class AxisParams:
    """Physical and electrical parameters of one lead-screw axis."""

    name: str            # axis label: x, y or z
    m: float             # load mass, kg
    D: float             # dynamic friction coefficient, N*s/m
    mu: float            # static friction coefficient
    r: float             # screw radius, m
    L: float             # screw length, m
    l: float             # pitch, m per revolution
    Ra: float            # armature resistance, ohm
    Ka: float            # torque constant, N*m/A
    Kb: float            # back-EMF constant, V*s/rad
    rho_steel: float     # screw density, kg/m^3
    V_deadzone: float    # minimum voltage that moves the carrier from rest, V
    V_max: float         # supply saturation, V
    g_input: float       # gravity disturbance input, m/s^2 (9.8 on z, else 0)
    travel_min: float    # m
    travel_max: float    # m

    def __post_init__(self):
        positive = {
            "m": self.m, "r": self.r, "L": self.L, "l": self.l,
            "Ra": self.Ra, "Ka": self.Ka, "Kb": self.Kb,
            "rho_steel": self.rho_steel, "V_max": self.V_max,
        }
        for key, val in positive.items():
            if not (val > 0.0 and math.isfinite(val)):
                raise ParameterError(f"{self.name}: {key} must be > 0, got {val!r}")
        if not 0.0 <= self.mu < 1.0:
            raise ParameterError(f"{self.name}: mu must be in [0, 1), got {self.mu}")
        if self.D < 0.0:
            raise ParameterError(f"{self.name}: D must be >= 0, got {self.D}")
        if not 0.0 <= self.V_deadzone < self.V_max:
            raise ParameterError(
                f"{self.name}: need 0 <= V_deadzone < V_max, got "
                f"{self.V_deadzone} vs {self.V_max}")
        if self.g_input not in (0.0, 9.8):
            raise ParameterError(f"{self.name}: g_input must be 0 or 9.8, got {self.g_input}")
        if not self.travel_min < self.travel_max:
            raise ParameterError(f"{self.name}: empty travel range")


@dataclass(frozen=True)
class DerivedConstants:
    """Constants computed from AxisParams; see derive_constants."""

    alpha: float    # thread helix angle, rad
    gamma: float    # torque per newton of axial load, m
    K: float        # pitch constant, m/rad
    M_screw: float  # screw mass, kg
    J_l: float      # screw moment of inertia, kg*m^2
    K1: float       # V*s/m
    K2: float       # V*s^2/m
    K3: float       # V*s^2/m


@dataclass(frozen=True)
class PlantState:
    pos: float = 0.0   # m
    vel: float = 0.0   # m/s
    t: float = 0.0     # s


@dataclass(frozen=True)
class StepperState:
    """Open-loop geared stepper for the tool-roll angle."""

    theta: float = 0.0        # deg, always an integer multiple of step_size
    step_size: float = 1.5    # deg per step
    step_hz: float = 125.0    # steps per second
    pending: float = 0.0      # fractional step credit carried between updates


def derive_constants(p: AxisParams) -> DerivedConstants:
    """Compute the helix/torque/inertia constants and the K1..K3 coefficients."""
    if p.r <= 0.0 or p.l <= 0.0 or p.Ka <= 0.0:
        raise ParameterError(f"{p.name}: degenerate screw geometry")
    alpha = math.atan(p.l / (2.0 * math.pi * p.r))
    sin_a, cos_a = math.sin(alpha), math.cos(alpha)
    gamma = p.r * (sin_a + p.mu * cos_a) / (cos_a - p.mu * sin_a)
    K = p.l / (2.0 * math.pi)
    if K <= 0.0 or gamma <= 0.0:
        raise ParameterError(f"{p.name}: degenerate screw geometry")
    M_screw = math.pi * p.r * p.r * p.L * p.rho_steel
    J_l = 0.5 * M_screw * p.r * p.r
    K1 = p.D * p.Ra * gamma / p.Ka + p.Kb / K
    K2 = p.Ra * J_l / (p.Ka * K) + p.Ra * p.m * gamma / p.Ka
    K3 = p.Ra * gamma * p.m / p.Ka
    return DerivedConstants(alpha, gamma, K, M_screw, J_l, K1, K2, K3)


def fit_dynamic_friction(p: AxisParams, V_sat: float, v_max: float) -> float:
    """Solve for D from one measured (saturation voltage, terminal velocity) pair.

    At steady state the acceleration term vanishes, so
    V_sat = K1(D) * v_max + K3 * g.  Any D already present on p is ignored.
    """
    if v_max <= 0.0:
        raise ParameterError(f"{p.name}: v_max must be > 0")
    dc = derive_constants(replace(p, D=0.0))
    gravity_term = dc.K3 * p.g_input
    if V_sat <= gravity_term:
        raise ParameterError(
            f"{p.name}: V_sat {V_sat} V cannot even hold the gravity load")
    K1_needed = (V_sat - gravity_term) / v_max
    D = (K1_needed - p.Kb / dc.K) * p.Ka / (p.Ra * dc.gamma)
    if D < 0.0:
        raise ParameterError(
            f"{p.name}: inconsistent calibration pair ({V_sat} V, {v_max} m/s) "
            f"implies negative friction {D:.3g}")
    return D


def steady_state_velocity(p: AxisParams, dc: DerivedConstants, Va: float) -> float:
    """Terminal carrier velocity for a constant armature voltage."""
    if abs(Va) > p.V_max:
        raise ParameterError(f"{p.name}: |Va|={abs(Va)} exceeds V_max={p.V_max}")
    if abs(Va) < p.V_deadzone:
        return 0.0
    return (Va - dc.K3 * p.g_input) / dc.K1


def plant_derivatives(p: AxisParams, dc: DerivedConstants, s: PlantState,
                      Va: float) -> tuple[float, float]:
    """(d_pos, d_vel) at the given state.

    Static friction makes the drive dead inside the voltage band
    [-V_deadzone, V_deadzone]: from rest the carrier stays put (the screw is
    self-locking, so Va = 0 holds position even against gravity), and a
    moving carrier coasts on back-EMF and viscous drag alone until the
    command leaves the band again.
    """
    if abs(s.vel) < V_EPS and abs(Va) < p.V_deadzone:
        return 0.0, 0.0
    u = Va if abs(Va) >= p.V_deadzone else 0.0
    d_vel = (u - dc.K1 * s.vel - dc.K3 * p.g_input) / dc.K2
    return s.vel, d_vel


def quantize_theta(target: float, step_size: float) -> float:
    """Nearest reachable shaft angle (integer number of steps)."""
    return round(target / step_size) * step_size


def stepper_update(s: StepperState, target_theta: float, dt: float) -> StepperState:
    """Advance the open-loop stepper toward the quantized target.

    Steps are issued at step_hz; fractional step credit is carried while in
    motion and discarded once the target is reached, so an idle stepper
    cannot bank steps.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    goal = quantize_theta(target_theta, s.step_size)
    steps_needed = round((goal - s.theta) / s.step_size)
    if steps_needed == 0:
        return replace(s, pending=0.0)
    credit = s.pending + dt * s.step_hz
    available = math.floor(credit + 1e-9)
    n = min(abs(steps_needed), available)
    direction = 1.0 if steps_needed > 0 else -1.0
    theta = s.theta + direction * n * s.step_size
    pending = 0.0 if n == abs(steps_needed) else credit - available
    return replace(s, theta=theta, pending=pending)
