"""Benchmark the numba kernels against the pure-numpy fallback.

Runs every hot geometry kernel on realistic sizes under both backends,
asserts the results agree exactly, and prints per-kernel timings. The first
numba call includes JIT compilation; a warmup run is timed out separately.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from votetrack.kernels import numba_impl, numpy_impl


def timeit(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench(name, args, repeat, equal=np.array_equal):
    np_fn = getattr(numpy_impl, name)
    nb_fn = getattr(numba_impl, name)
    nb_fn(*args)  # warmup: trigger JIT compilation outside the timing loop
    t_np, r_np = timeit(np_fn, args, repeat)
    t_nb, r_nb = timeit(nb_fn, args, repeat)
    assert equal(r_np, r_nb), f"{name}: backends disagree"
    speedup = t_np / t_nb if t_nb > 0 else float("inf")
    print(f"{name:28s} numpy {t_np * 1e3:9.3f} ms   numba {t_nb * 1e3:9.3f} ms"
          f"   x{speedup:6.2f}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5,
                        help="timing repetitions per kernel (best is kept)")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    coords = rng.normal(size=(1024, 3))
    center = np.array([0.1, -0.2, 0.3])
    size = np.array([2.4, 1.2, 1.0])

    def rect(yaw, cx):
        c, s = np.cos(yaw), np.sin(yaw)
        local = np.array([[1.2, 0.6], [-1.2, 0.6], [-1.2, -0.6], [1.2, -0.6]])
        return local @ np.array([[c, s], [-s, c]]) + [cx, 0.0]

    print(f"repeat={args.repeat}, sizes: 1024 points")
    bench("pairwise_distances", (coords,), args.repeat)
    bench("farthest_point_indices", (coords, 256, 0), args.repeat)
    bench("box_frame_mask", (coords, center, size, 0.4), args.repeat)
    bench("rect_intersection_area", (rect(0.0, 0.0), rect(0.5, 0.8)),
          args.repeat, equal=lambda a, b: a == b)


if __name__ == "__main__":
    main()
