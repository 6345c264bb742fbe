# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled closed-loop kernel.

Line-for-line transcription of armsim._kernel_py (the behavioural
reference).  Both backends must produce bit-identical traces: keep every
arithmetic expression and its evaluation order in sync with the Python
twin, and build without fused multiply-add (-ffp-contract=off).
"""

from libc.math cimport floor

BACKEND = "cython"


def run_axis_ticks(
    # plant constants
    double K1, double K2, double K3g, double v_eps, double v_dz,
    double travel_min, double travel_max,
    # controller constants
    double kp, double ki, double i_clamp, double v_sat, double band,
    double gate_delay,
    # encoder constants
    double resolution, double kappa, double stroke_limit,
    # timing
    double dt_plant, double dt_ctrl, long substeps, long sensor_every,
    # carried state
    double pos, double vel, double integral, double in_band, long pwm_on,
    long counts, long last_index, long last_dir, double leg_sum,
    long leg_ticks, double leg_path, double last_pos, long prev_short,
    long drops_total, double home_offset, double measured, long tick,
    long clamp_events,
    # per-tick setpoints in, trace columns out (equal-length 1-D float64)
    double[::1] sp, double[::1] out_true, double[::1] out_meas,
    double[::1] out_va, double[::1] out_pwm,
):
    """Run len(sp) control ticks; returns the updated state tuple."""
    cdef Py_ssize_t n = sp.shape[0]
    cdef double half_h = 0.5 * dt_plant
    cdef double sixth_h = dt_plant / 6.0
    cdef Py_ssize_t k
    cdef long j, index, direction, lost, short
    cdef double sp_k, e, abs_e, candidate, unclamped, va, av, av_vel, av_va
    cdef double step_path, mean_speed, u
    cdef double a1, a2, a3, a4, v2, v3, v4

    for k in range(n):
        if tick % sensor_every == 0:
            index = <long>floor((pos - home_offset) / resolution)
            counts += index - last_index
            last_index = index
            step_path = pos - last_pos
            leg_path += -step_path if step_path < 0.0 else step_path
            last_pos = pos
            av = vel if vel >= 0.0 else -vel
            if av > v_eps:
                direction = 1 if vel > 0.0 else -1
                if last_dir != 0 and direction != last_dir:
                    short = 1 if leg_path < stroke_limit else 0
                    if short and prev_short:
                        mean_speed = leg_sum / leg_ticks if leg_ticks > 0 else 0.0
                        lost = <long>floor(kappa * mean_speed)
                        counts -= lost
                        drops_total += lost
                    prev_short = short
                    leg_sum = 0.0
                    leg_ticks = 0
                    leg_path = 0.0
                last_dir = direction
                leg_sum += av
                leg_ticks += 1
            measured = counts * resolution + home_offset

        sp_k = sp[k]
        e = sp_k - measured
        abs_e = -e if e < 0.0 else e

        # power gate: off after a full dwell in band, wake the instant the
        # error leaves the band (integral cleared so it cannot kick)
        if abs_e < band:
            if pwm_on:
                in_band += dt_ctrl
                if in_band >= gate_delay:
                    in_band = 0.0
                    pwm_on = 0
        else:
            in_band = 0.0
            if not pwm_on:
                pwm_on = 1
                integral = 0.0

        # PI with a clamped integrator and conditional anti-windup
        candidate = integral + ki * e * dt_ctrl
        if candidate > i_clamp:
            candidate = i_clamp
        elif candidate < -i_clamp:
            candidate = -i_clamp
        unclamped = kp * e + candidate
        if (unclamped > v_sat and e > 0.0) or (unclamped < -v_sat and e < 0.0):
            pass
        else:
            integral = candidate
        if pwm_on:
            va = kp * e + integral
            if va > v_sat:
                va = v_sat
            elif va < -v_sat:
                va = -v_sat
        else:
            va = 0.0

        out_true[k] = pos
        out_meas[k] = measured
        out_va[k] = va
        out_pwm[k] = 1.0 if pwm_on else 0.0

        # drive is dead inside the voltage band: a resting carrier stays
        # latched, a moving one coasts with zero drive
        av_va = -va if va < 0.0 else va
        u = va if av_va >= v_dz else 0.0
        for j in range(substeps):
            av_vel = -vel if vel < 0.0 else vel
            if av_vel < v_eps and av_va < v_dz:
                vel = 0.0
            else:
                a1 = (u - K1 * vel - K3g) / K2
                v2 = vel + half_h * a1
                a2 = (u - K1 * v2 - K3g) / K2
                v3 = vel + half_h * a2
                a3 = (u - K1 * v3 - K3g) / K2
                v4 = vel + dt_plant * a3
                a4 = (u - K1 * v4 - K3g) / K2
                pos = pos + sixth_h * (vel + 2.0 * v2 + 2.0 * v3 + v4)
                vel = vel + sixth_h * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
                if pos < travel_min:
                    pos = travel_min
                    if vel < 0.0:
                        vel = 0.0
                    clamp_events += 1
                elif pos > travel_max:
                    pos = travel_max
                    if vel > 0.0:
                        vel = 0.0
                    clamp_events += 1
        tick += 1

    return (pos, vel, integral, in_band, pwm_on,
            counts, last_index, last_dir, leg_sum, leg_ticks, leg_path,
            last_pos, prev_short, drops_total, home_offset, measured, tick,
            clamp_events)
