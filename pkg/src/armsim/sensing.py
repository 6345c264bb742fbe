"""Measurement channels.

Incremental optical encoders with count quantization and a
reversal-miscount drift law, homing switches, and the two-camera IR
detection model that recovers the operator's 4-DOF pose from marker blobs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .plant import V_EPS


@dataclass(frozen=True)
class EncoderModel:
    """Incremental encoder: 4 opaque sectors per revolution, so one count
    per quarter pitch of carrier travel.

    The reversal miscount models inertia fighting the electronic direction
    switch during sustained zigzag motion: when a short stroke (leg path
    below stroke_limit) ends in a reversal and the previous leg was also a
    short stroke, the accumulator silently loses floor(kappa * mean leg
    speed) counts.  Long sweeps reach a settled glide before turning and
    isolated direction changes switch cleanly, so neither drifts.
    kappa = 0 disables the drift entirely, leaving pure quantization.
    """

    resolution: float          # m per count (pitch / 4)
    kappa: float = 0.0         # counts dropped per m/s of leg speed
    stroke_limit: float = 0.25  # legs shorter than this count as zigzag, m
    home_offset: float = 0.0   # position at count 0, m
    counts: int = 0
    last_dir: int = 0          # sign of last counted motion
    last_index: int = 0        # floor((true - home)/resolution) at last sample
    leg_speed_sum: float = 0.0
    leg_ticks: int = 0
    leg_path: float = 0.0      # |path| accumulated over the current leg, m
    last_pos: float = 0.0
    prev_short: int = 0        # whether the previous leg was a short stroke
    drops_total: int = 0       # counts lost to reversals since last homing


def encoder_measure(e: EncoderModel) -> float:
    return e.counts * e.resolution + e.home_offset


def encoder_update(e: EncoderModel, true_pos: float, vel: float) -> EncoderModel:
    """One sensor tick: accumulate boundary crossings, apply reversal loss.

    Must be called with the plant truth every sensor period.  The drift
    fires when the motion direction flips (dwells at rest in between do not
    reset it) and always knocks the accumulator the same way, so the error
    builds monotonically like the long-run hardware behaviour.
    """
    index = math.floor((true_pos - e.home_offset) / e.resolution)
    counts = e.counts + (index - e.last_index)
    last_dir = e.last_dir
    leg_sum = e.leg_speed_sum
    leg_ticks = e.leg_ticks
    leg_path = e.leg_path + abs(true_pos - e.last_pos)
    prev_short = e.prev_short
    drops = e.drops_total
    if abs(vel) > V_EPS:
        direction = 1 if vel > 0.0 else -1
        if last_dir != 0 and direction != last_dir:
            short = 1 if leg_path < e.stroke_limit else 0
            if short and prev_short:
                mean_speed = leg_sum / leg_ticks if leg_ticks > 0 else 0.0
                lost = math.floor(e.kappa * mean_speed)
                counts -= lost
                drops += lost
            prev_short = short
            leg_sum = 0.0
            leg_ticks = 0
            leg_path = 0.0
        last_dir = direction
        leg_sum += abs(vel)
        leg_ticks += 1
    return replace(e, counts=counts, last_index=index, last_dir=last_dir,
                   leg_speed_sum=leg_sum, leg_ticks=leg_ticks,
                   leg_path=leg_path, last_pos=true_pos,
                   prev_short=prev_short, drops_total=drops)


def home(e: EncoderModel, switch_pos: float) -> EncoderModel:
    """Re-reference the encoder at a calibration switch.

    The carrier must physically sit at the switch; all accumulated drift is
    zeroed because the count origin is re-anchored to a known position.
    """
    return replace(e, counts=0, home_offset=switch_pos, last_index=0,
                   last_dir=0, leg_speed_sum=0.0, leg_ticks=0, leg_path=0.0,
                   last_pos=switch_pos, prev_short=0, drops_total=0)


@dataclass(frozen=True)
class Blob:
    """One detected IR spot in pixel coordinates."""

    u: int
    v: int


@dataclass(frozen=True)
class CameraModel:
    mm_per_px_u: float
    mm_per_px_v: float
    width: int = 1024
    height: int = 768
    origin_u: int = 512        # pixel of the world origin
    origin_v: int = 384

    def __post_init__(self):
        for scale in (self.mm_per_px_u, self.mm_per_px_v):
            if not 0.0 < scale <= 1.0:
                raise ValueError(f"mm/pixel scale out of range: {scale}")


@dataclass(frozen=True)
class Pose4:
    """Operator forearm pose: positions in m, roll angle in degrees."""

    x: float
    y: float
    z: float
    theta: float


def camera_project(c: CameraModel, world_mm: tuple[float, float]) -> Blob | None:
    """Project a world point (mm, camera-plane coordinates) to a pixel blob.

    Returns None when the point falls off the sensor; that is a dropout,
    not an error.
    """
    a, b = world_mm
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("non-finite world coordinates")
    u = round(a / c.mm_per_px_u) + c.origin_u
    v = round(b / c.mm_per_px_v) + c.origin_v
    if not (0 <= u < c.width and 0 <= v < c.height):
        return None
    return Blob(u, v)


def project_pose(pose: Pose4, top: CameraModel, side: CameraModel,
                 led_separation_mm: float = 60.0):
    """Generate the blob set an ideal marker rig would produce for a pose.

    Top camera images the wrist-band centroid in the x/y plane; the side
    camera images the two hand LEDs, whose midpoint rides at z and whose
    baseline tilts with the roll angle.  Returns (top_blob, (led_a, led_b)),
    any of which may be None when out of field.
    """
    top_blob = camera_project(top, (pose.x * 1e3, pose.y * 1e3))
    half = 0.5 * led_separation_mm
    th = math.radians(pose.theta)
    du, dv = half * math.cos(th), half * math.sin(th)
    z_mm = pose.z * 1e3
    led_a = camera_project(side, (-du, z_mm - dv))
    led_b = camera_project(side, (du, z_mm + dv))
    return top_blob, (led_a, led_b)


def detect_pose(top_blob: Blob | None, side_pair: tuple[Blob | None, Blob | None],
                top: CameraModel, side: CameraModel) -> Pose4 | None:
    """Recover the 4-DOF pose from one frame of blobs.

    None signals a detection dropout (a required blob missing); the caller
    is expected to hold the last valid pose.  Roll recovery from two
    indistinguishable markers is unambiguous over (-90, 90] degrees.
    """
    led_a, led_b = side_pair
    if top_blob is None or led_a is None or led_b is None:
        return None
    x = (top_blob.u - top.origin_u) * top.mm_per_px_u * 1e-3
    y = (top_blob.v - top.origin_v) * top.mm_per_px_v * 1e-3
    v_mid = 0.5 * (led_a.v + led_b.v)
    z = (v_mid - side.origin_v) * side.mm_per_px_v * 1e-3
    theta = math.degrees(math.atan2(led_b.v - led_a.v, led_b.u - led_a.u))
    if theta <= -180.0:
        theta += 360.0
    return Pose4(x, y, z, theta)
