import random

import pytest

from armsim.controller import ControllerState, PIGains, pi_update, power_gate_update

GAINS = PIGains(Kp=55.0, Ki=150.0, i_clamp=13.8, V_sat=13.8)


def test_zero_error_zero_output():
    va, _ = pi_update(ControllerState(), GAINS, 0.2, 0.2, 1e-3)
    assert va == 0.0


def test_small_error_hand_arithmetic():
    va, c = pi_update(ControllerState(), GAINS, 0.01, 0.0, 1e-3)
    assert va == pytest.approx(55 * 0.01 + 150 * 0.01 * 1e-3, rel=1e-12)
    assert va == pytest.approx(0.5515, rel=1e-9)
    assert c.integral == pytest.approx(0.0015, rel=1e-12)


def test_saturation_with_anti_windup():
    va, c = pi_update(ControllerState(), GAINS, 1.0, 0.0, 1e-3)
    assert va == 13.8
    assert c.integral == 0.0  # integration suspended while driving into saturation


def test_integral_clamped():
    g = PIGains(Kp=55.0, Ki=150.0, i_clamp=5.0, V_sat=13.8)
    c = ControllerState(integral=4.9)
    # candidate passes the clamp while the output is far from saturation
    _, c = pi_update(c, g, 0.001, 0.0, 10.0)
    assert c.integral == 5.0


def test_output_always_saturated():
    rng = random.Random(3)
    c = ControllerState()
    for _ in range(2000):
        va, c = pi_update(c, GAINS, rng.uniform(-1, 1), rng.uniform(-1, 1), 1e-3)
        assert abs(va) <= 13.8
        assert abs(c.integral) <= 13.8


def test_pure_proportional_when_ki_zero():
    g = PIGains(Kp=55.0, Ki=0.0, i_clamp=13.8, V_sat=13.8)
    c = ControllerState()
    for e in (0.05, -0.08, 0.001):
        va, c = pi_update(c, g, e, 0.0, 1e-3)
        assert va == pytest.approx(min(max(55 * e, -13.8), 13.8), rel=1e-12)
        assert c.integral == 0.0


def test_pwm_off_forces_zero_output():
    c = ControllerState(pwm_on=False, integral=3.0)
    va, _ = pi_update(c, GAINS, 0.5, 0.0, 1e-3)
    assert va == 0.0


def test_gate_opens_after_full_dwell():
    c = ControllerState()
    for _ in range(5000):
        c = power_gate_update(c, 0.5e-3, 1e-3)
    assert not c.pwm_on


def test_gate_dwell_resets_when_error_leaves_band():
    c = ControllerState()
    for _ in range(4990):
        c = power_gate_update(c, 0.5e-3, 1e-3)
    assert c.pwm_on
    c = power_gate_update(c, 2e-3, 1e-3)
    assert c.pwm_on
    assert c.in_band_s == 0.0


def test_gate_reasserts_immediately_and_clears_integral():
    c = ControllerState(pwm_on=False, integral=5.0)
    c = power_gate_update(c, 1.2e-3, 1e-3)
    assert c.pwm_on
    assert c.integral == 0.0
    assert c.in_band_s == 0.0


def test_gate_stays_off_inside_band():
    c = ControllerState(pwm_on=False)
    for _ in range(100):
        c = power_gate_update(c, 0.2e-3, 1e-3)
    assert not c.pwm_on


def test_determinism_bitwise():
    rng = random.Random(11)
    seq = [(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)) for _ in range(500)]

    def run():
        c = ControllerState()
        out = []
        for sp, meas in seq:
            va, c = pi_update(c, GAINS, sp, meas, 1e-3)
            c = power_gate_update(c, sp - meas, 1e-3)
            out.append((va, c.integral, c.in_band_s, c.pwm_on))
        return out

    assert run() == run()


def test_bad_dt_rejected():
    with pytest.raises(ValueError):
        pi_update(ControllerState(), GAINS, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        power_gate_update(ControllerState(), 0.0, -1.0)


def test_gain_invariants():
    with pytest.raises(ValueError):
        PIGains(Kp=0.0, Ki=150.0, i_clamp=13.8, V_sat=13.8)
    with pytest.raises(ValueError):
        PIGains(Kp=55.0, Ki=-1.0, i_clamp=13.8, V_sat=13.8)
    with pytest.raises(ValueError):
        PIGains(Kp=55.0, Ki=150.0, i_clamp=20.0, V_sat=13.8)
