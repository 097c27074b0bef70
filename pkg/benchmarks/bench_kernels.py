#!/usr/bin/env python3
"""Benchmark: compiled kernels vs the pure-numpy fallback.

Times the three hot paths -- copula partial evaluation, the belief
integrand matrices that back every quadrature, and conditional-CDF
inversion for signal sampling -- and a composite GameSetup workload.

Run:  python3 benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from prescreen import _backend
from prescreen._kernels_py import KIND_H


def _time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(quick=False):
    mods = _backend.all_kernel_modules()
    if len(mods) < 2:
        print("compiled extension unavailable; benchmarking fallback only")
    rng = np.random.default_rng(0)
    size = 100_000 if quick else 1_000_000
    reps = 3 if quick else 5
    # hallucinatory mixture plus an AMH component: 3-component mixture
    fams = np.array([1, 0, 2], dtype=np.int64)
    alphas = np.array([0.0, 0.0, 0.7])
    weights = np.array([0.4, 0.4, 0.2])
    x = rng.uniform(0, 1, size)
    y = rng.uniform(0, 1, size)
    P, T = (256, 128) if quick else (1024, 256)
    fx = rng.uniform(0, 1, P)
    fv = rng.uniform(0, 1, P)
    u = rng.uniform(0, 1, (P, T))
    comp = rng.integers(0, 3, size)

    cases = [
        ("copula_cab", lambda k: k.copula_cab(fams, alphas, weights, x, y)),
        ("integrand_matrix[H]",
         lambda k: k.integrand_matrix(KIND_H, fams, alphas, weights,
                                      4, 9, 0, fx, fv, u)),
        ("invert_c1", lambda k: k.invert_c1(fams, alphas, weights, comp,
                                            x, y)),
    ]
    print(f"{'kernel':24s}" + "".join(f"{m.IMPLEMENTATION:>14s}"
                                      for m in mods) + f"{'speedup':>10s}")
    for name, call in cases:
        times = [_time(lambda k=k: call(k), reps) for k in mods]
        ratio = times[0] / times[-1] if len(times) > 1 else 1.0
        print(f"{name:24s}" + "".join(f"{t * 1e3:11.2f} ms" for t in times)
              + f"{ratio:9.2f}x")
    return mods


def bench_setup(quick=False):
    """Composite workload: GameSetup construction plus a batch of direct
    win-kernel queries, under each kernel implementation."""
    import importlib

    import prescreen._backend as backend
    import prescreen.beliefs as beliefs
    import prescreen.predictors as predictors

    rng = np.random.default_rng(1)
    xq = rng.uniform(0.02, 0.98, 200 if quick else 2000)
    vq = rng.uniform(0.02, 0.98, xq.size)
    results = {}
    for impl in ("python", "compiled"):
        try:
            import os
            os.environ["PRESCREEN_KERNELS"] = impl
            importlib.reload(backend)
            importlib.reload(predictors)
            importlib.reload(beliefs)
        except ImportError:
            continue
        pred = predictors.Predictor(predictors.Copula.mixture(
            [0.5, 0.5], [predictors.Copula.hallucinatory(0.6),
                         predictors.Copula.amh(0.8)]),
            predictors.Marginal.power(0.2), predictors.Marginal.uniform())

        def work():
            gs = beliefs.GameSetup(7, 3, pred, backend="generic")
            gs.win_cdf_H(xq, vq)
            gs.win_pdf_h(xq, vq)
            gs.marginal_cdf(xq)

        results[impl] = _time(work, 3)
    import os
    os.environ.pop("PRESCREEN_KERNELS", None)
    importlib.reload(backend)
    importlib.reload(predictors)
    importlib.reload(beliefs)
    print()
    print("composite GameSetup + batched win-kernel queries:")
    for impl, t in results.items():
        print(f"  {impl:10s} {t * 1e3:10.1f} ms")
    if len(results) == 2:
        print(f"  speedup    {results['python'] / results['compiled']:.2f}x")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    bench_kernels(args.quick)
    bench_setup(args.quick)
