"""Compiled vs pure-Python kernels, and one closed-loop control step per backend.

    python3 benchmarks/bench_kernels.py [--repeat 200]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from l1nmpc import kernels
from l1nmpc.harness.config import default_scenario

STEP_SNIPPET = """
import timeit
from l1nmpc.controllers import Controller
from l1nmpc.harness.config import default_scenario
from l1nmpc.trajectory import reference_window
cfg = default_scenario()
traj = cfg.trajectory.build(cfg.nominal_params)
ctrl = Controller("l1_nmpc", cfg.nominal_params, cfg.ocp, cfg.l1, cfg.control_dt)
x = traj.sample(0.0)[0].as_array()
ref = reference_window(traj, 0.0, cfg.ocp.horizon_steps, cfg.ocp.dt)
ctrl.compute(x, ref)
n = {n}
print(timeit.timeit(lambda: ctrl.compute(x, ref), number=n) / n)
"""


def _inputs(seed=0, horizon=20):
    cfg = default_scenario()
    p = cfg.nominal_params.packed
    rng = np.random.default_rng(seed)
    x = np.zeros(13)
    x[3] = 1.0
    x[7:13] = 0.1 * rng.standard_normal(6)
    u = np.full(4, cfg.nominal_params.hover_thrust)
    inputs = np.tile(u, (horizon, 1)) + 0.05 * rng.standard_normal((horizon, 4))
    return cfg, p, x, u, inputs


def kernel_cases(backend, horizon=20):
    cfg, p, x, u, inputs = _inputs(horizon=horizon)
    z3 = np.zeros(3)
    dt = cfg.ocp.dt
    states = backend.rollout(x, inputs, p, dt)
    z = np.ascontiguousarray(x[7:13])
    zh = z + 0.01
    q = np.ascontiguousarray(x[3:7])
    g0_inv = np.eye(6)
    gain = np.ones(6)
    decay = np.full(4, 0.86)
    clip = np.full(6, 3.6)
    as_diag = np.array(cfg.l1.as_diag, dtype=float)
    sigma = np.zeros(6)
    ul1 = np.zeros(4)
    return {
        "rk4": lambda: backend.rk4(x, u, p, cfg.sim_dt, z3, z3, True),
        "rollout N=20": lambda: backend.rollout(x, inputs, p, dt),
        "linearize_traj N=20": lambda: backend.linearize_traj(states, inputs, p, dt),
        "l1_adapt": lambda: backend.l1_adapt(zh, z, q, ul1, g0_inv, gain, decay, clip),
        "l1_observe": lambda: backend.l1_observe(zh, z, q, u, ul1, sigma, p, as_diag, zh - z, cfg.l1.ts),
    }


def time_case(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=repeat, repeat=3)) / repeat


def control_step_time(pure, repeat):
    env = dict(os.environ)
    if pure:
        env["L1NMPC_PURE"] = "1"
    else:
        env.pop("L1NMPC_PURE", None)
    out = subprocess.run([sys.executable, "-c", STEP_SNIPPET.format(n=repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)

    compiled = kernels.compiled_backend
    pure = kernels.python_backend
    print(f"{'kernel':24s} {'compiled [us]':>14s} {'python [us]':>12s} {'speedup':>8s}")
    py_cases = kernel_cases(pure)
    c_cases = kernel_cases(compiled) if compiled is not None else {}
    for name, fn in py_cases.items():
        tp = time_case(fn, args.repeat) * 1e6
        if name in c_cases:
            tc = time_case(c_cases[name], args.repeat) * 1e6
            print(f"{name:24s} {tc:14.2f} {tp:12.2f} {tp / tc:8.1f}")
        else:
            print(f"{name:24s} {'n/a':>14s} {tp:12.2f}")

    n = max(args.repeat // 4, 10)
    tp = control_step_time(True, n) * 1e3
    if compiled is not None:
        tc = control_step_time(False, n) * 1e3
        print(f"\nL1-NMPC control step: compiled {tc:.3f} ms, python {tp:.3f} ms ({tp / tc:.1f}x)")
    else:
        print(f"\nL1-NMPC control step: python {tp:.3f} ms (compiled core not built)")


if __name__ == "__main__":
    main()
