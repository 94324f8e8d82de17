"""Time the batched solver backends against each other.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Exercises solve_shunted_batch on batch shapes matching real workloads
(K systems of N buses, one system per harmonic order) and finishes with
an end-to-end QSTS day on the bundled feeder under each backend.
"""

import argparse
import time

import numpy as np

from harmflow import kernels
from harmflow.feeder import bundled_feeder_path, load_feeder, load_resources
from harmflow.qsts import run_qsts

SHAPES = [(8, 16), (16, 40), (16, 128), (64, 128), (16, 512)]


def _batch(rng, k, n):
    base = rng.normal(size=(k, n, n)) + 1j * rng.normal(size=(k, n, n))
    idx = np.arange(n)
    base[:, idx, idx] += 8.0
    shunts = rng.normal(size=(k, n)) + 1j * rng.normal(size=(k, n))
    rhs = rng.normal(size=(k, n)) + 1j * rng.normal(size=(k, n))
    return base, shunts, rhs


def bench_batches(repeats):
    rng = np.random.default_rng(1)
    print(f"{'shape':>12} " + " ".join(f"{b:>12}" for b in kernels.available_backends()))
    for k, n in SHAPES:
        base, shunts, rhs = _batch(rng, k, n)
        row = []
        for name in kernels.available_backends():
            with kernels.use_backend(name):
                kernels.solve_shunted_batch(base, shunts, rhs)  # warm up
                t0 = time.perf_counter()
                for _ in range(repeats):
                    kernels.solve_shunted_batch(base, shunts, rhs)
                row.append((time.perf_counter() - t0) / repeats)
        print(f"{f'{k}x{n}':>12} " + " ".join(f"{t * 1e3:>10.2f}ms" for t in row))


def bench_qsts(steps):
    network, devices = load_feeder(bundled_feeder_path())
    profiles, spectra = load_resources(bundled_feeder_path().parent)
    for name in kernels.available_backends():
        with kernels.use_backend(name):
            t0 = time.perf_counter()
            run_qsts(network, devices, profiles, spectra, steps=steps, dt=60.0)
            elapsed = time.perf_counter() - t0
        print(f"qsts {steps} steps, backend {name:>8}: {elapsed:.2f} s")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--steps", type=int, default=1440)
    args = parser.parse_args()
    print(f"backends available: {', '.join(kernels.available_backends())}")
    bench_batches(args.repeats)
    bench_qsts(args.steps)


if __name__ == "__main__":
    main()
