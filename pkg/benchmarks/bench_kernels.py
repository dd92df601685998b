"""Compare the numba and NumPy implementations of the hot kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--draws 100000] [--repeat 5]
    python3 benchmarks/bench_kernels.py --end-to-end

The first form times each kernel pair in-process and checks that the two
backends agree.  ``--end-to-end`` runs one Monte-Carlo visibility estimate
in two subprocesses, one of them with ``CATLIFT_DISABLE_NUMBA=1``, which
is the switch users actually flip.
"""

from __future__ import annotations

import argparse
import math
import os
import subprocess
import sys
import time

import numpy as np

from catlift import kernels
from catlift._accel import HAVE_NUMBA


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_in_process(draws: int, repeat: int) -> int:
    rng = np.random.default_rng(0)
    t = 3.0 * math.pi
    eps3 = rng.standard_normal((draws, 3)) * 1e-6
    eps4 = kernels._humpty_eps4(eps3)
    da = np.zeros((draws, 4))
    M = np.array([[math.cos(0.01), math.sin(0.01)], [-math.sin(0.01), math.cos(0.01)]])
    c = np.array([1e-3, 0.0])
    r0, s0 = np.array([1.0, 0.0]), np.eye(2)

    cases = [
        ("closure_defect", kernels.closure_defect_np, kernels.closure_defect_nb, (da, eps4, t)),
        ("humpty_draws", kernels.humpty_draws_np, kernels.humpty_draws_nb, (eps3, 100.0, t)),
        ("humpty_sums", kernels.humpty_sums_np, kernels.humpty_sums_nb, (eps3, 100.0, t)),
        ("propagate_affine", kernels.propagate_affine_np, kernels._propagate_nb_wrapper, (M, c, 10_000, r0, s0)),
    ]
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'numba [ms]':>12}{'speed-up':>10}{'rel diff':>14}")
    status = 0
    for name, f_np, f_nb, args in cases:
        t_np, out_np = best_of(lambda: f_np(*args), repeat)
        if not HAVE_NUMBA:
            print(f"{name:<18}{1e3 * t_np:>12.2f}{'n/a':>12}")
            continue
        f_nb(*args)  # compile outside the timing
        t_nb, out_nb = best_of(lambda: f_nb(*args), repeat)
        a = np.concatenate([np.ravel(x) for x in (out_np if isinstance(out_np, tuple) else (out_np,))])
        b = np.concatenate([np.ravel(x) for x in (out_nb if isinstance(out_nb, tuple) else (out_nb,))])
        diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300))
        if diff > 1e-9:
            status = 1
        print(f"{name:<18}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}{diff:>14.1e}")
    return status


_SNIPPET = (
    "import time, math; t0 = time.perf_counter();"
    "from catlift import kernels, robustness;"
    "v = robustness.humpty_visibility_mc(100.0, 2 * math.pi, 1e-5, {n}, seed=1);"
    "print(kernels.BACKEND, v[0], v[1], time.perf_counter() - t0)"
)


def bench_end_to_end(draws: int) -> int:
    print(f"{'backend':<10}{'visibility':>14}{'std err':>12}{'wall [s]':>10}")
    for flag in ("0", "1"):
        env = dict(os.environ, CATLIFT_DISABLE_NUMBA=flag)
        out = subprocess.run(
            [sys.executable, "-c", _SNIPPET.format(n=draws)], env=env, capture_output=True, text=True, check=True
        ).stdout.split()
        print(f"{out[0]:<10}{float(out[1]):>14.6f}{float(out[2]):>12.2e}{float(out[3]):>10.2f}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--draws", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args(argv)
    if args.end_to_end:
        return bench_end_to_end(args.draws)
    return bench_in_process(args.draws, args.repeat)


if __name__ == "__main__":
    sys.exit(main())
