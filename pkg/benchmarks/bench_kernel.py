"""Time the compiled and pure-Python simulation kernels on the same trials.

    python3 benchmarks/bench_kernel.py [--horizon 20000] [--trials 5]
"""
import argparse
import time

import numpy as np

from misspec_bandits import kernel
from misspec_bandits.env import context_cdf, trial_streams

PHI = np.array([[2.0, 3.0], [4.0, 5.0], [2.0, 1.0]])
MU = np.array([4.847194000241604, 9.971738442201563, -0.8004288091105813])


def trial_args(algo, horizon, seed):
    noise_rng, explore_rng, context_rng = trial_streams(seed)
    gaps = MU.max() - MU
    min_eig = 41.0 if algo == kernel.LINUCB else 0.0
    return (PHI[None], gaps, MU, algo, 0.0, 0.5, 0.05, 0.5, min_eig,
            explore_rng.random((horizon, 2)), noise_rng.standard_normal(horizon),
            context_rng.random(horizon), context_cdf([1.0]))


def bench(fn, work):
    start = time.perf_counter()
    out = [fn(*a) for a in work]
    return time.perf_counter() - start, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizon", type=int, default=20_000)
    ap.add_argument("--trials", type=int, default=5)
    args = ap.parse_args()
    if kernel.run_trial_ext is None:
        print("compiled kernel not built; only the Python kernel is available")
    for name, algo in [("eps_greedy", kernel.EPS_GREEDY), ("linucb", kernel.LINUCB)]:
        work = [trial_args(algo, args.horizon, s) for s in range(args.trials)]
        t_py, out_py = bench(kernel.run_trial_py, work)
        line = f"{name:<11} python {t_py:8.3f}s"
        if kernel.run_trial_ext is not None:
            t_ext, out_ext = bench(kernel.run_trial_ext, work)
            same = all(np.array_equal(a, b) for x, y in zip(out_py, out_ext) for a, b in zip(x[:4], y[:4]))
            line += f"   cython {t_ext:8.4f}s   speedup {t_py / t_ext:7.1f}x   identical={same}"
        print(line)


if __name__ == "__main__":
    main()
