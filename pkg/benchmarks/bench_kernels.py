"""Compiled vs pure-Python kernel timings.

    python benchmarks/bench_kernels.py [--repeat N]

Two kernels are timed on both backends: the oracle propagation of a full
reference trajectory (a scalar-heavy adaptive Runge-Kutta loop) and the
per-node dynamics residual with its costate Jacobian (vectorised numpy in
the fallback). A full solve is timed once with the default backend; it is
dominated by the dense QR factorisation, which stays in LAPACK either way.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from tfc_descent import BoundaryConditions, OuterSettings, ProfileMode, solve, reference_lander
from tfc_descent._backend import BACKENDS
from tfc_descent.validation import validate_solution


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if "cython" not in BACKENDS:
        print("compiled extension not built; run `python setup.py build_ext --inplace`", file=sys.stderr)

    lander = reference_lander()
    bc = BoundaryConditions([-900.0, 100.0, 1500.0], [30.0, -10.0, -70.0], [0.0] * 3, [0.0] * 3, 1905.0)
    sol = solve(bc, lander, OuterSettings(profile_mode=ProfileMode.MIN_MAX))

    rng = np.random.default_rng(0)
    n = 5000
    acc = rng.normal(size=(n, 3))
    lam = rng.normal(size=(n, 3))
    beta = rng.uniform(2.0, 7.0, size=n)

    rows = []
    for name, kern in BACKENDS.items():
        prop = best_of(lambda: validate_solution(sol, bc, lander, rtol=1e-12, backend=name), args.repeat)
        loss = best_of(lambda: kern.loss_and_costate_jacobian(acc, lam, beta, lander.a_g), args.repeat)
        rows.append((name, prop, loss))

    print(f"{'backend':<8} {'propagation [ms]':>17} {'loss kernel n=5000 [ms]':>24}")
    for name, prop, loss in rows:
        print(f"{name:<8} {prop * 1e3:17.3f} {loss * 1e3:24.3f}")
    if len(rows) == 2:
        (_, p0, l0), (_, p1, l1) = sorted(rows, key=lambda r: r[0] != "cython")
        print(f"speedup  {p1 / p0:16.1f}x {l1 / l0:23.1f}x")

    t = time.perf_counter()
    solve(bc, lander, OuterSettings(profile_mode=ProfileMode.MIN_MAX))
    print(f"full min-max solve: {(time.perf_counter() - t) * 1e3:.0f} ms")


if __name__ == "__main__":
    main()
