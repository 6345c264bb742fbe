import math
import random

import pytest

from armsim.sensing import (Blob, CameraModel, EncoderModel, Pose4,
                            camera_project, detect_pose, encoder_measure,
                            encoder_update, home, project_pose)

TOP = CameraModel(mm_per_px_u=0.586, mm_per_px_v=0.576)
SIDE = CameraModel(mm_per_px_u=0.586, mm_per_px_v=0.586)


def make_encoder(pitch, kappa=0.0, start=0.0):
    return home(EncoderModel(resolution=pitch / 4.0, kappa=kappa), start)


def test_resolutions_from_pitch():
    assert make_encoder(1.5e-3).resolution == pytest.approx(0.375e-3)
    assert make_encoder(1.25e-3).resolution == pytest.approx(0.3125e-3)


def test_millimetre_sweep_counts_two_boundaries():
    e = make_encoder(1.5e-3)
    v = 0.01
    for k in range(1, 11):  # 0 -> 1.0 mm in 0.1 mm sensor steps
        e = encoder_update(e, k * 1e-4, v)
    assert e.counts == 2
    assert encoder_measure(e) == pytest.approx(0.75e-3)


def test_quantization_bound_random_walk():
    rng = random.Random(5)
    e = make_encoder(1.25e-3, kappa=0.0, start=0.2)
    pos, dt = 0.2, 0.01
    for _ in range(2000):
        vel = rng.uniform(-0.25, 0.25)
        pos = min(max(pos + vel * dt, 0.0), 0.45)
        e = encoder_update(e, pos, vel)
        assert abs(encoder_measure(e) - pos) <= e.resolution + 1e-12


def zigzag(e, legs, speed=0.15, dt=0.01):
    """Drive the encoder through back-and-forth legs of given lengths."""
    pos = e.last_pos
    direction = 1.0
    for leg in legs:
        steps = max(1, round(leg / (speed * dt)))
        for _ in range(steps):
            pos += direction * speed * dt
            e = encoder_update(e, pos, direction * speed)
        direction = -direction
    return e


def test_reversal_drop_needs_consecutive_short_strokes():
    # one short stroke then reversal: no drop (no zigzag chain yet)
    e = zigzag(make_encoder(1.25e-3, kappa=16.0, start=0.2), [0.1, 0.01])
    assert e.drops_total == 0
    # second consecutive short stroke: the reversal ending it drops counts
    e = zigzag(make_encoder(1.25e-3, kappa=16.0, start=0.2), [0.1, 0.1, 0.01])
    assert e.drops_total == math.floor(16.0 * 0.15)


def test_long_sweep_breaks_the_zigzag_chain():
    e = zigzag(make_encoder(1.25e-3, kappa=16.0, start=0.05), [0.1, 0.3, 0.01])
    assert e.drops_total == 0


def test_drops_shift_measurement_and_home_restores():
    e = zigzag(make_encoder(1.25e-3, kappa=16.0, start=0.2),
               [0.1, 0.1, 0.1, 0.1, 0.05])
    assert e.drops_total > 0
    drift = abs(encoder_measure(e) - e.last_pos)
    assert drift > e.resolution  # real accumulated drift
    e2 = home(e, e.last_pos)
    assert encoder_measure(e2) == e.last_pos
    assert e2.drops_total == 0


def test_home_at_travel_limit():
    e = home(EncoderModel(resolution=0.375e-3), 0.45)
    assert encoder_measure(e) == 0.45


def test_kappa_zero_tracks_within_one_resolution_any_profile():
    e = make_encoder(1.25e-3, kappa=0.0, start=0.2)
    e = zigzag(e, [0.05, 0.02, 0.11, 0.07, 0.2], speed=0.2)
    assert abs(encoder_measure(e) - e.last_pos) <= e.resolution + 1e-12


def test_camera_projection_examples():
    cam = CameraModel(mm_per_px_u=0.586, mm_per_px_v=0.586,
                      origin_u=0, origin_v=0, width=1024, height=768)
    assert camera_project(cam, (58.6, 0.0)) == Blob(100, 0)
    assert camera_project(cam, (0.0, 0.0)) == Blob(0, 0)
    # 0.30 mm is 0.512 px: rounds past the half pixel
    assert camera_project(cam, (0.30, 0.0)) == Blob(1, 0)


def test_camera_out_of_field_is_dropout_not_error():
    assert camera_project(TOP, (400.0, 0.0)) is None
    assert camera_project(TOP, (0.0, -300.0)) is None
    with pytest.raises(ValueError):
        camera_project(TOP, (math.nan, 0.0))


def test_theta_from_led_pair():
    horizontal = detect_pose(Blob(512, 384), (Blob(100, 100), Blob(110, 100)),
                             TOP, SIDE)
    assert horizontal.theta == 0.0
    vertical = detect_pose(Blob(512, 384), (Blob(100, 100), Blob(100, 110)),
                           TOP, SIDE)
    assert vertical.theta == 90.0


def test_missing_blob_signals_dropout():
    assert detect_pose(None, (Blob(0, 0), Blob(1, 1)), TOP, SIDE) is None
    assert detect_pose(Blob(1, 1), (None, Blob(1, 1)), TOP, SIDE) is None


def test_round_trip_worked_pose():
    pose = Pose4(x=0.050, y=0.050, z=0.100, theta=30.0)
    top_blob, pair = project_pose(pose, TOP, SIDE)
    got = detect_pose(top_blob, pair, TOP, SIDE)
    assert abs(got.x - pose.x) <= 0.6e-3
    assert abs(got.y - pose.y) <= 0.6e-3
    assert abs(got.z - pose.z) <= 0.6e-3
    # one-pixel baseline quantization on a 60 mm marker pair
    theta_quant = math.degrees(math.atan(0.586 / 60.0))
    assert abs(got.theta - pose.theta) <= 2 * theta_quant


def test_round_trip_random_poses():
    rng = random.Random(17)
    for _ in range(1000):
        pose = Pose4(x=rng.uniform(-0.2, 0.2), y=rng.uniform(-0.2, 0.2),
                     z=rng.uniform(-0.18, 0.18), theta=rng.uniform(-89, 89))
        top_blob, pair = project_pose(pose, TOP, SIDE)
        got = detect_pose(top_blob, pair, TOP, SIDE)
        assert got is not None
        assert abs(got.x - pose.x) <= 0.6e-3
        assert abs(got.y - pose.y) <= 0.6e-3
        assert abs(got.z - pose.z) <= 0.6e-3


def test_camera_scale_invariants():
    with pytest.raises(ValueError):
        CameraModel(mm_per_px_u=0.0, mm_per_px_v=0.5)
    with pytest.raises(ValueError):
        CameraModel(mm_per_px_u=0.5, mm_per_px_v=1.5)
