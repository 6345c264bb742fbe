"""Benchmark the compiled closed-loop kernel against the pure-Python twin.

Runs the triangular endurance preset (41 s active + settle tail at a
0.1 ms plant step, ~460k RK4 substeps) on each available backend, checks
the traces are bit-identical, and reports timings.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from armsim import kernel
from armsim.plant import V_EPS, derive_constants
from armsim.experiments import load_default_config
from armsim.simkit import AxisLoopState, SignalSpec, SimConfig, build_setpoints


def run_once(fn, p, dc, gains, sim, sp, kappa, stroke):
    n = len(sp)
    outs = [np.empty(n) for _ in range(4)]
    state = AxisLoopState.at_rest(0.225)
    t0 = time.perf_counter()
    fn(dc.K1, dc.K2, dc.K3 * p.g_input, V_EPS, p.V_deadzone,
       p.travel_min, p.travel_max,
       gains.Kp, gains.Ki, gains.i_clamp, gains.V_sat, 1e-3, 5.0,
       p.l / 4.0, kappa, stroke,
       sim.dt_plant, sim.dt_ctrl, sim.substeps, sim.sensor_every,
       *state.as_tuple(), sp, *outs)
    return time.perf_counter() - t0, outs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    cfg = load_default_config()
    p = cfg.axes["z"]
    dc = derive_constants(p)
    sim = SimConfig(duration=46.0)
    sig = SignalSpec(kind="tri", amplitude=0.1, freq=0.375, center=0.225,
                     active_s=41.0)
    sp = build_setpoints(sig, sim)
    substeps = len(sp) * sim.substeps
    print(f"workload: z-axis triangular endurance, {len(sp)} control ticks, "
          f"{substeps} plant substeps\n")

    results = {}
    for name, fn in kernel.backends().items():
        best, outs = min(
            (run_once(fn, p, dc, cfg.gains, sim, sp, cfg.kappa,
                      cfg.stroke_limit) for _ in range(args.repeat)),
            key=lambda r: r[0])
        results[name] = (best, outs)
        print(f"{name:>8}: {best * 1e3:8.1f} ms "
              f"({substeps / best / 1e6:6.1f} M substeps/s)")

    if len(results) == 2:
        (t_py, out_py), (t_cy, out_cy) = results["python"], results["cython"]
        identical = all(np.array_equal(a, b) for a, b in zip(out_py, out_cy))
        print(f"\nspeedup: {t_py / t_cy:.1f}x, traces bit-identical: {identical}")
        if not identical:
            raise SystemExit("backend traces diverged")


if __name__ == "__main__":
    main()
