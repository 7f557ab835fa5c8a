"""Compare the jitted and pure-numpy kernel paths.

    python3 benchmarks/bench_kernels.py [--n 100 200] [--q 5] [--repeat 5]

Part one times each kernel pair in-process (both implementations are always
importable). Part two times whole replications (sample, privatise, solve) in
two subprocesses, one with ``PRIVP0_PURE_NUMPY=1``, so the switch that the
package actually uses is exercised end to end.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from privp0 import kernels

_E2E = """
import time
from privp0 import _accel
from privp0.harness import Cell, run_cell
cell = Cell(0, {n}, {q}, 3.0, "zero", {reps})
run_cell(Cell(0, {n}, {q}, 3.0, "zero", 2))  # warm-up / jit compile
t = time.perf_counter()
run_cell(cell)
print(_accel.USE_NUMBA, (time.perf_counter() - t) / {reps})
"""


def _first(out):
    return np.asarray(out[0] if isinstance(out, tuple) else out, dtype=np.float64)


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(n, q, repeat):
    rng = np.random.default_rng(0)
    alpha = rng.uniform(-1, 1, n)
    beta = rng.uniform(-1, 1, n)
    beta[-1] = 0.0
    u = rng.random((n, n))
    target = np.full(n, 0.4 * (n - 1) * (q - 1))
    x0 = np.zeros(n)
    lo, hi = -31.0, 31.0

    cases = {
        "dyad_moments": (
            lambda: kernels.dyad_moments_numba(alpha, beta, q),
            lambda: kernels.dyad_moments_numpy(alpha, beta, q),
        ),
        "sample_weights": (
            lambda: kernels.sample_weights_numba(alpha, beta, q, u),
            lambda: kernels.sample_weights_numpy(alpha, beta, q, u),
        ),
        "solve_coordinates": (
            lambda: kernels.solve_coordinates_numba(target, x0, beta, lo, hi, q),
            lambda: kernels.solve_coordinates_numpy(target, x0, beta, lo, hi, q),
        ),
    }
    rows = []
    for name, (fast, slow) in cases.items():
        a, b = _first(fast()), _first(slow())  # also compiles the jitted one
        agree = float(np.abs(a - b).max())
        t_nb, t_np = _best(fast, repeat), _best(slow, repeat)
        rows.append((name, n, q, t_nb, t_np, agree))
    return rows


def bench_end_to_end(n, q, reps):
    out = {}
    for pure in (False, True):
        env = dict(os.environ)
        env["PRIVP0_PURE_NUMPY"] = "1" if pure else "0"
        res = subprocess.run([sys.executable, "-c", _E2E.format(n=n, q=q, reps=reps)],
                             env=env, capture_output=True, text=True, check=True)
        flag, secs = res.stdout.split()
        out["numpy" if pure else "numba"] = (flag, float(secs))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[100, 200])
    ap.add_argument("--q", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--reps", type=int, default=100, help="replications for the end-to-end timing")
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args(argv)

    print(f"{'kernel':<18}{'n':>5}{'q':>3}{'numba ms':>11}{'numpy ms':>11}{'speedup':>9}{'max diff':>11}")
    for n in args.n:
        for name, n_, q, t_nb, t_np, diff in bench_kernels(n, args.q, args.repeat):
            print(f"{name:<18}{n_:>5}{q:>3}{1e3 * t_nb:>11.3f}{1e3 * t_np:>11.3f}"
                  f"{t_np / t_nb:>9.1f}{diff:>11.1e}")
    if args.skip_e2e:
        return
    print()
    print(f"{'replication':<18}{'n':>5}{'q':>3}{'numba ms':>11}{'numpy ms':>11}{'speedup':>9}")
    for n in args.n:
        r = bench_end_to_end(n, args.q, args.reps)
        t_nb, t_np = r["numba"][1], r["numpy"][1]
        assert r["numba"][0] == "True" and r["numpy"][0] == "False"
        print(f"{'sample+solve':<18}{n:>5}{args.q:>3}{1e3 * t_nb:>11.3f}{1e3 * t_np:>11.3f}"
              f"{t_np / t_nb:>9.1f}")


if __name__ == "__main__":
    main()
