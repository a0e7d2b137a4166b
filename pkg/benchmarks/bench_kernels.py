"""Time the compiled kernels against their numpy twins on the same inputs.

Usage: ``python benchmarks/bench_kernels.py [--paths N] [--dt DT]``.
Both backends are imported in-process; the environment flag only changes
which one the library dispatches to, not which ones exist.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from minwealth import ConsumptionSpec, MarketParams, solve
from minwealth import kernels
from minwealth._accel import HAVE_NUMBA
from minwealth.verify import build_policy


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=5_000)
    ap.add_argument("--dt", type=float, default=1 / 250)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    sol = solve(MarketParams(r=0.02, mu=0.06, sigma=0.2, lam=0.04, rho=0.05), ConsumptionSpec(0.01, 1.0, 0.05))
    pol, table = build_policy(sol, -1.0)
    ruin_args = (pol, table, 1, args.paths, 2.0, 0.0, args.dt, 500.0, 5.0)
    rng = np.random.default_rng(0)
    n = 16001
    lower, upper = -rng.uniform(0, 1, n), -rng.uniform(0, 1, n)
    diag, rhs = 2.5 + rng.uniform(0, 1, n), rng.normal(size=n)
    wide_pol, wide_table = build_policy(sol, -28.0, n_nodes=262145)
    min_args = (wide_pol, wide_table, 1, args.paths, 2.0, 2.0, args.dt, 500.0)

    cases = {
        "ruin_paths": (lambda: kernels.ruin_paths_numba(*ruin_args), lambda: kernels.ruin_paths_numpy(*ruin_args)),
        "thomas": (lambda: kernels.thomas_numba(lower, diag, upper, rhs),
                   lambda: kernels.thomas_numpy(lower, diag, upper, rhs)),
        "minimum_paths": (lambda: kernels.minimum_paths_numba(*min_args),
                          lambda: kernels.minimum_paths_numpy(*min_args)),
    }
    if not HAVE_NUMBA:
        print("numba not installed; compiled column repeats the numpy twin")
    print(f"{'kernel':<18}{'compiled (s)':>14}{'numpy (s)':>12}{'speedup':>10}")
    for name, (fast, slow) in cases.items():
        fast()  # compile outside the timing
        t_fast, t_slow = best_of(fast, args.repeats), best_of(slow, args.repeats)
        print(f"{name:<18}{t_fast:>14.4f}{t_slow:>12.4f}{t_slow / t_fast:>10.1f}")


if __name__ == "__main__":
    main()
