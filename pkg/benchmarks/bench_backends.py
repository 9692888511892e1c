"""Timing comparison of the numba and numpy kernel backends.

Runs the hot kernels on representative workload shapes (the pattern-mining
and classification batch sizes) and prints one table row per kernel. Invoke
directly:

    python benchmarks/bench_backends.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from gomkcn.backends import numpy_impl

try:
    from gomkcn.backends import numba_impl
except ImportError:
    numba_impl = None


def make_workload(rng, b=1000, m=6, d=3, t=3, n_filters=8):
    adjs = np.triu(rng.uniform(0, 1, (b, m, m)), 1)
    adjs = adjs + np.swapaxes(adjs, 1, 2)
    feats = rng.uniform(0, 1, (b, m, d))
    f_adjs = np.triu(rng.uniform(0, 1, (n_filters, m, m)), 1)
    f_adjs = f_adjs + np.swapaxes(f_adjs, 1, 2)
    f_feats = rng.uniform(0, 1, (n_filters, m, d))
    sub_levels = numpy_impl.batch_subtree_levels(adjs, feats, t)
    filt_levels = numpy_impl.batch_subtree_levels(f_adjs, f_feats, t)
    big_adj = (rng.uniform(0, 1, (600, 600)) < 0.01).astype(float)
    big_adj = np.triu(big_adj, 1)
    big_adj = big_adj + big_adj.T
    return adjs, feats, sub_levels, filt_levels, big_adj


def bench(fn, args, repeat):
    fn(*args)  # warmup (and JIT compile on the numba path)
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    adjs, feats, sub_levels, filt_levels, big_adj = make_workload(rng)
    inv_dtau = 1.0 / 3.0
    weights = rng.normal(0, 1, (sub_levels.shape[0], filt_levels.shape[0]))
    _, match = numpy_impl.batch_kappa_greedy(sub_levels, filt_levels, inv_dtau)
    dlevels = rng.normal(0, 1, sub_levels.shape)

    cases = [
        ("batch_subtree_levels", "batch_subtree_levels", (adjs, feats, 3)),
        ("batch_kappa_greedy", "batch_kappa_greedy",
         (sub_levels, filt_levels, inv_dtau)),
        ("accumulate_matched_grads", "accumulate_matched_grads",
         (sub_levels, filt_levels, match, weights, inv_dtau, True)),
        ("batch_levels_backward", "batch_levels_backward_features",
         (adjs, dlevels)),
        ("extract_all_subgraphs", "extract_all_subgraphs", (big_adj, 3, 6)),
    ]

    print(f"{'kernel':28s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for label, name, call_args in cases:
        t_np = bench(getattr(numpy_impl, name), call_args, args.repeat)
        if numba_impl is None:
            print(f"{label:28s} {t_np * 1e3:10.2f}ms {'n/a':>12s} {'n/a':>9s}")
            continue
        t_nb = bench(getattr(numba_impl, name), call_args, args.repeat)
        print(f"{label:28s} {t_np * 1e3:10.2f}ms {t_nb * 1e3:10.2f}ms "
              f"{t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
