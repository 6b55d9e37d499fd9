"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --sizes 500,2000 --k 3,5 --repeats 3

Prints one CSV row per (kernel, size, backend).  Outputs of both backends are
compared before timing, so a mismatch aborts the run.
"""
import argparse
import csv
import sys
import time

import numpy as np

from noisy_sort import kernels
from noisy_sort.core import ScoreMatrix
from noisy_sort.presort_dp import band


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best * 1000


def random_scores(rng, n):
    v = np.triu(rng.integers(-1, 2, size=(n, n)), 1)
    return ScoreMatrix(v - v.T)


def cases(rng, n, ks):
    seq = rng.permutation(n).astype(np.int64)
    yield "inversion_count", {}, lambda b: kernels.inversion_count(seq, b)
    q = random_scores(rng, n)
    for k in ks:
        init = rng.permutation(n).astype(np.int64)
        up, down = band(init, q, k)
        yield "sweep_dp", {"k": k}, lambda b, up=up, down=down, init=init, k=k: \
            kernels.sweep_dp(up, down, init, k, b)[0].tolist()
    if n <= 3000:
        Q = q.values.astype(np.int8)
        start = rng.permutation(n).astype(np.int64)

        def sweep(b):
            order = start.copy()
            kernels.insertion_sweep(order, Q, b)
            return order.tolist()

        yield "insertion_sweep", {}, sweep


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="500,2000")
    parser.add_argument("--k", default="2,4")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if kernels._compiled is None:
        sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    rng = np.random.default_rng(args.seed)
    ks = [int(x) for x in args.k.split(",")]
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["kernel", "n", "k", "compiled_ms", "python_ms", "speedup"])
    for n in (int(x) for x in args.sizes.split(",")):
        for name, extra, fn in cases(rng, n, ks):
            if fn("compiled") != fn("python"):
                sys.exit(f"{name} n={n}: backends disagree")
            fast = best_of(lambda: fn("compiled"), args.repeats)
            slow = best_of(lambda: fn("python"), args.repeats)
            out.writerow([name, n, extra.get("k", ""), f"{fast:.3f}", f"{slow:.3f}",
                          f"{slow / fast:.1f}"])
            sys.stdout.flush()


if __name__ == "__main__":
    main()
