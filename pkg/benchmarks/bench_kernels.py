"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--machines 20000] [--samples 288] [--repeat 5]

The first numba call (compilation) is reported separately and left out of
the timed runs.
"""

import argparse
import time

import numpy as np

from wise import _accel, kernels


def fleet(m, k, rng):
    rates = rng.uniform(0, 100, (m, k))
    target = np.tile(rng.uniform(20, 80, k), (m, 1))
    spread = np.tile(rng.uniform(10, 40, k), (m, 1))
    weight = np.ones((m, k))
    rmax = np.full((m, k), 90.0)
    alpha = np.ones((m, k))
    has_target = np.ones((m, k), dtype=bool)
    has_target[:, -1] = False
    has_max = np.zeros((m, k), dtype=bool)
    has_max[:, -2:] = True
    return rates, target, spread, weight, rmax, alpha, has_target, has_max


def segments(m, samples, rng):
    values = np.round(rng.uniform(0, 100, m * samples), 3)
    offsets = np.arange(0, m * samples + 1, samples, dtype=np.int64)
    return values, offsets, np.array([50, 95, 99], dtype=np.int64)


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--machines", type=int, default=20_000)
    ap.add_argument("--resources", type=int, default=5)
    ap.add_argument("--samples", type=int, default=288)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = [
        ("wise_matrix", kernels.wise_matrix_numba, kernels.wise_matrix_numpy,
         fleet(args.machines, args.resources, rng)),
        ("segment_stats", kernels.segment_stats_numba, kernels.segment_stats_numpy,
         segments(args.machines, args.samples, rng)),
    ]
    print(f"machines={args.machines} resources={args.resources} samples={args.samples} "
          f"numba={'yes' if _accel.HAVE_NUMBA else 'no'} active={_accel.backend_name()}")
    print(f"{'kernel':<14} {'numpy ms':>10} {'numba ms':>10} {'compile ms':>11} {'speedup':>8}")
    for name, nb, npy, data in cases:
        t_np = best_of(npy, data, args.repeat)
        if _accel.HAVE_NUMBA:
            t0 = time.perf_counter()
            nb(*data)
            compile_ms = (time.perf_counter() - t0) * 1e3
            t_nb = best_of(nb, data, args.repeat)
            print(f"{name:<14} {t_np * 1e3:10.2f} {t_nb * 1e3:10.2f} {compile_ms:11.1f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{name:<14} {t_np * 1e3:10.2f} {'-':>10} {'-':>11} {'-':>8}")


if __name__ == "__main__":
    main()
