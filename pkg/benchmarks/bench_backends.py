"""Compare the numba and numpy backends on the two hot kernels.

Usage::

    python3 benchmarks/bench_backends.py [--particles N] [--repeat R]

Each kernel is timed after one warm-up call, so numba compilation time is
reported separately and excluded from the steady-state numbers.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from langevin_phi import _backend
from langevin_phi.rng import TAG_ULA, RngStream
from langevin_phi.samplers import rgo_rejection
from langevin_phi.targets import make_cosine_perturbed


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_normals(n, d, repeat, backend):
    rng = RngStream(0)
    ids = np.arange(n)
    start = time.perf_counter()
    rng.normals(TAG_ULA, ids, 0, d, backend=backend)
    first = time.perf_counter() - start
    return first, best_of(lambda: rng.normals(TAG_ULA, ids, 1, d, backend=backend), repeat)


def bench_rgo(n, d, repeat, backend):
    p = make_cosine_perturbed(0.5, d)
    y = RngStream(1).normals(TAG_ULA, np.arange(n), 0, d) * 2.0
    rng = RngStream(2)
    start = time.perf_counter()
    rgo_rejection(y, p, 0.25, rng, backend=backend)
    first = time.perf_counter() - start
    return first, best_of(lambda: rgo_rejection(y, p, 0.25, rng, step=1, backend=backend), repeat)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--particles", type=int, default=100_000)
    parser.add_argument("--dim", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = ["numpy"] + (["numba"] if _backend.NUMBA_AVAILABLE else [])
    print(f"particles={args.particles} dim={args.dim} repeat={args.repeat}")
    print(f"{'kernel':<18}{'backend':<9}{'first call (s)':>16}{'steady (s)':>12}{'speedup':>9}")
    for name, bench in (("philox normals", bench_normals), ("rejection RGO", bench_rgo)):
        results = {b: bench(args.particles, args.dim, args.repeat, b) for b in backends}
        base = results["numpy"][1]
        for b, (first, steady) in results.items():
            print(f"{name:<18}{b:<9}{first:>16.4f}{steady:>12.4f}{base / steady:>8.1f}x")
    if not _backend.NUMBA_AVAILABLE:
        print("numba not importable; only the numpy backend was timed")


if __name__ == "__main__":
    main()
