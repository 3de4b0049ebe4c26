"""Time the compiled support-table kernels against the plain-Python fallback.

    python3 bench/bench_kernels.py [--rows N] [--events N] [--repeat N]
"""

import argparse
import timeit

import numpy as np

from dstq import _kernels_py as pure

try:
    from dstq import _kernels as compiled
except ImportError:
    compiled = None


def make_table(rows, events, seed):
    rng = np.random.default_rng(seed)
    words = (events + 63) // 64
    bits = rng.integers(0, 2**63, size=(rows, words), dtype=np.uint64)
    bits |= rng.integers(0, 2**63, size=(rows, words), dtype=np.uint64) << np.uint64(1)
    weights = rng.integers(1, 1000, size=rows, dtype=np.int64)
    return bits, weights


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--events", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    bits, weights = make_table(args.rows, args.events, args.seed)
    probe = [3, 70, 200, args.events - 1]
    impls = [("python", pure)] + ([("cython", compiled)] if compiled else [])
    results = {}
    print(f"rows={args.rows} events={args.events} repeat={args.repeat}")
    for name, mod in impls:
        sums = timeit.timeit(lambda: mod.masked_weight_sum(bits, weights, probe), number=args.repeat)
        rows = timeit.timeit(lambda: mod.rows_with_event(bits, 70), number=args.repeat)
        results[name] = (mod.masked_weight_sum(bits, weights, probe), list(mod.rows_with_event(bits, 70)))
        print(f"{name:7s} masked_weight_sum {1e6 * sums / args.repeat:9.1f} us"
              f"   rows_with_event {1e6 * rows / args.repeat:9.1f} us")
    if compiled and results["python"] != results["cython"]:
        raise SystemExit("backends disagree")
    if not compiled:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
