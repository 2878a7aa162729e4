"""Time the numba kernels against their numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--n 1000] [--repeat 3]

Each kernel is called once to trigger compilation, then timed; the
table reports the best of ``--repeat`` runs and the speedup.
"""
import argparse
import time

import numpy as np

from jssl.composition import _weibull_params, merge_increments
from jssl.hazards import LearnerSpec
from jssl.kernels import get_backend
from jssl.simulation import load_scenario, simulate_dataset


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n):
    s = load_scenario("dependent")
    d, _ = simulate_dataset(s, n, 1)
    fits = [LearnerSpec("cox").fit(d, role) for role in ("cause1", "cause2", "censoring")]
    grid, (a1, a2, ac) = merge_increments(fits, d.X, s.tau)
    status = d.status.astype(np.int64)
    c, nu = _weibull_params(s.hazards(), d.X[:200])
    order = np.argsort(d.time, kind="stable")
    time_, ev = d.time[order], (d.status[order] == 1)
    X = np.ascontiguousarray(d.X[order])
    ug = np.unique(time_[ev])
    gi = np.where(ev, np.searchsorted(ug, time_), -1).astype(np.int64)
    t_eval = np.linspace(0.0, s.tau, 50)
    return {
        "brier_step": lambda k: k.brier_step(d.time, status, grid, a1, a2, ac, s.tau, False),
        "step_cif": lambda k: k.step_cif(grid, a1, a2, t_eval, 1),
        "weibull_occupation (200 x)": lambda k: k.weibull_occupation(c, nu, t_eval, 1e-10),
        "weibull_brier (200 obs)": lambda k: k.weibull_brier(c, nu, d.time[:200], status[:200], s.tau, 1e-8),
        "grow_forest (20 trees)": lambda k: k.grow_forest(X, time_, ev, gi, 20, 2, 15, True, 7, 32),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    nb, npy = get_backend("numba"), get_backend("numpy")
    print(f"{'kernel':<28}{'numba s':>12}{'numpy s':>12}{'speedup':>10}")
    for name, fn in cases(args.n).items():
        a = best_of(lambda: fn(nb), args.repeat)
        b = best_of(lambda: fn(npy), args.repeat)
        print(f"{name:<28}{a:>12.4f}{b:>12.4f}{b / a:>10.1f}")


if __name__ == "__main__":
    main()
