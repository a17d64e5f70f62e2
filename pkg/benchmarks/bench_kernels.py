"""Compare the compiled and numpy kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--particles N] [--repeat R]

Each kernel is timed on identical inputs from both backends, and the outputs
are checked for bit equality. A full distributed filter step on the nine-tank
scenario is timed in a subprocess per backend (the backend is chosen at import).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dpffd.kernels import _reference
from dpffd.tanks import TankParams

STEP_SNIPPET = """
import time
from dpffd import kernels
from dpffd.experiment import run_experiment
from dpffd.scenario import FaultConfig, Scenario
s = Scenario(seed=1, duration_steps={steps}, faults=[FaultConfig("leak-tank-4", 4, {half})])
s.filter.n_particles = {particles}
t = time.perf_counter()
run_experiment(s, "distributed")
print(kernels.BACKEND, (time.perf_counter() - t) / {steps})
"""


def kernel_cases(n, rng):
    p = TankParams()
    x = rng.uniform(0, 20, (n, 9))
    w = rng.random(n)
    w /= w.sum()
    flags = rng.random((n, 3)) < 0.5
    noise = rng.uniform(-0.75, 0.75, (n, 3, 2))
    sel = np.arange(3, 9, dtype=np.int64)
    z = rng.uniform(0, 20, 6)
    var = np.full(6, 0.2)
    return {
        "tank_healthy_step": (x, p.pipe_array, np.asarray(p.mu), p.pipe_area, p.tank_area, p.gravity, p.ts),
        "gaussian_loglik": (x, sel, z, var),
        "systematic_indices": (w, 0.37),
        "snap_binary": (flags, noise),
    }


def best_us(fn, args, repeat):
    t = timeit.Timer(lambda: fn(*args))
    loops, _ = t.autorange()
    return min(t.repeat(repeat, loops)) / loops * 1e6


def step_timing(backend, particles, steps):
    code = STEP_SNIPPET.format(steps=steps, half=steps // 2, particles=particles)
    env = dict(os.environ, DPFFD_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    if out.returncode:
        return None
    return float(out.stdout.split()[1]) * 1e3


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--particles", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--steps", type=int, default=200)
    args = ap.parse_args()
    try:
        from dpffd.kernels import _ckernels
    except ImportError:
        _ckernels = None
        print("compiled extension not built; timing the numpy backend only")

    rng = np.random.default_rng(0)
    print(f"kernel timings, N = {args.particles} particles (best of {args.repeat}, microseconds per call)")
    print(f"{'kernel':<22}{'numpy':>12}{'compiled':>12}{'speedup':>10}  identical")
    for name, call_args in kernel_cases(args.particles, rng).items():
        ref = best_us(getattr(_reference, name), call_args, args.repeat)
        if _ckernels is None:
            print(f"{name:<22}{ref:>12.1f}{'-':>12}{'-':>10}  -")
            continue
        fast = best_us(getattr(_ckernels, name), call_args, args.repeat)
        same = np.array_equal(getattr(_ckernels, name)(*call_args), getattr(_reference, name)(*call_args))
        print(f"{name:<22}{ref:>12.1f}{fast:>12.1f}{ref / fast:>9.2f}x  {same}")

    print(f"\nfull distributed step (3 nodes, N = {args.particles}), milliseconds per step over {args.steps} steps")
    for backend in ("python", "compiled"):
        ms = step_timing(backend, args.particles, args.steps)
        print(f"{backend:<10}{'unavailable' if ms is None else f'{ms:.2f}'}")


if __name__ == "__main__":
    main()
