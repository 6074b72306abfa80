"""Compare the compiled and numpy backends of the pseudo-label kernels.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``. Sizes cover the
desk-scale pool (500 x 10) and a CIFAR-sized pool (5000 x 100).
"""

import argparse
import timeit

import numpy as np

from fedol import core, kernels

SIZES = [(11, 500, 10), (11, 5000, 10), (11, 5000, 100), (51, 5000, 100)]


def instance(models, n, c, seed=0):
    rng = np.random.default_rng(seed)
    probs = rng.dirichlet(np.full(c, 0.3), size=(models, n))
    ent = kernels.row_entropy(probs, "python")
    thresholds = np.array([core.entropy_baseline(p, 0.3, e) for p, e in zip(probs, ent)])
    confs = probs.mean(axis=1)
    return probs, ent, thresholds, confs


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    print(f"backends: {', '.join(kernels.BACKENDS)} (default {kernels.BACKEND})")
    header = f"{'M x N x C':>16} {'kernel':>12}" + "".join(f"{b + ' ms':>12}" for b in kernels.BACKENDS)
    if "cython" in kernels.BACKENDS:
        header += f"{'speedup':>10}"
    print(header)
    for m, n, c in SIZES:
        probs, ent, thr, confs = instance(m, n, c)
        calls = {
            "row_entropy": lambda b: kernels.row_entropy(probs, b),
            "vote_labels": lambda b: kernels.vote_labels(probs, ent, thr, confs, b),
        }
        for name, call in calls.items():
            times = {b: min(timeit.repeat(lambda b=b: call(b), number=1, repeat=args.repeat)) * 1e3
                     for b in kernels.BACKENDS}
            line = f"{f'{m} x {n} x {c}':>16} {name:>12}" + "".join(f"{times[b]:>12.2f}" for b in times)
            if "cython" in times:
                line += f"{times['python'] / times['cython']:>9.1f}x"
            print(line)
        same = [kernels.vote_labels(probs, ent, thr, confs, b) for b in kernels.BACKENDS]
        assert all(np.array_equal(same[0], s) for s in same), "backends disagree"


if __name__ == "__main__":
    main()
