"""Benchmark the compiled kernels against the numpy reference backend.

Times the individual kernels at desk-scale shapes and one full training epoch
under each backend:

    python benchmarks/bench_backends.py [--inner 2000] [--epochs 3]
"""

import argparse
import time

import numpy as np

from softlabels import kernels
from softlabels.correlation import HeadConfig
from softlabels.datasets import SyntheticSpec, generate_synthetic, stratified_split
from softlabels.kernels import numpy_backend
from softlabels.training import Model, TrainConfig, train

try:
    from softlabels.kernels import _fast
except ImportError:
    _fast = None

rng = np.random.default_rng(0)

A32x32 = np.ascontiguousarray(rng.standard_normal((32, 32)))
B32x16 = np.ascontiguousarray(rng.standard_normal((32, 16)))
M32x16 = np.ascontiguousarray(rng.standard_normal((32, 16)))
V16 = np.ascontiguousarray(rng.standard_normal(16))
FLAT = np.ascontiguousarray(rng.standard_normal(512))
FLAT2 = np.ascontiguousarray(rng.standard_normal(512))
POS = np.abs(FLAT) + 0.1

KERNEL_CASES = [
    ("matmul_nn 32x32 @ 32x16", lambda k: k.matmul_nn(A32x32, B32x16)),
    ("matmul_nt 32x16 @ 16x32", lambda k: k.matmul_nt(M32x16, M32x16)),
    ("matmul_tn", lambda k: k.matmul_tn(B32x16, B32x16)),
    ("add 512", lambda k: k.add(FLAT, FLAT2)),
    ("mul 512", lambda k: k.mul(FLAT, FLAT2)),
    ("relu 512", lambda k: k.relu(FLAT)),
    ("exp 512", lambda k: k.exp(FLAT)),
    ("log 512", lambda k: k.log(POS)),
    ("add_rowvec 32x16", lambda k: k.add_rowvec(M32x16, V16)),
    ("col_sums 32x16", lambda k: k.col_sums(M32x16)),
    ("softmax rows 32x16", lambda k: k.softmax(M32x16)),
    ("normalize rows 32x16", lambda k: k.normalize(M32x16)),
    ("total_sum 512", lambda k: k.total_sum(FLAT)),
]


def time_case(fn, inner):
    best = float("inf")
    for _ in range(5):
        start = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - start) / inner)
    return best * 1e6  # microseconds


def bench_kernels(inner):
    print(f"{'kernel':<28} {'numpy us':>10} {'cython us':>10} {'speedup':>8}")
    for name, case in KERNEL_CASES:
        t_numpy = time_case(lambda: case(numpy_backend), inner)
        if _fast is None:
            print(f"{name:<28} {t_numpy:>10.2f} {'n/a':>10} {'n/a':>8}")
            continue
        t_fast = time_case(lambda: case(_fast), inner)
        print(f"{name:<28} {t_numpy:>10.2f} {t_fast:>10.2f} {t_numpy / t_fast:>7.2f}x")


def bench_training(epochs):
    spec = SyntheticSpec(num_classes=7, per_class=30, dim=8, stddev=0.5, seed=1)
    ds = generate_synthetic(spec)
    train_ds, val_ds = stratified_split(ds, ratio=0.8, seed=1)
    names = kernels.available_backends()
    print(f"\ntraining, {epochs} epochs, N={len(train_ds)}, K=7, mode=ccl (best of 3)")

    def run_once():
        model = Model(8, 7, head_cfg=HeadConfig(lr_head=0.01), seed=1)
        cfg = TrainConfig(epochs=epochs, batch_size=32, lr_head=0.01, seed=1)
        start = time.perf_counter()
        train(model, train_ds, val_ds, cfg, mode="ccl")
        return time.perf_counter() - start

    results = {}
    for name in names:
        kernels.use_backend(name)
        run_once()  # warm up
        results[name] = min(run_once() for _ in range(3))
        print(f"  {name:<8} {results[name] * 1e3:8.1f} ms")
    if len(results) == 2:
        print(f"  speedup  {results['numpy'] / results['cython']:8.2f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--inner", type=int, default=2000, help="inner loop per kernel timing")
    parser.add_argument("--epochs", type=int, default=3, help="epochs for the training benchmark")
    args = parser.parse_args()
    if _fast is None:
        print("note: compiled extension not built; showing numpy timings only\n")
    bench_kernels(args.inner)
    bench_training(args.epochs)


if __name__ == "__main__":
    main()
