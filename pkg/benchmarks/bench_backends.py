"""Time each hot kernel on the numba and numpy backends.

    python3 benchmarks/bench_backends.py [--repeat N] [--output FILE]

Prints a JSON object mapping kernel name to per-backend best-of-N seconds
and the numpy/numba speed ratio. The first numba call of each kernel is
excluded so compilation is not counted.
"""
import argparse
import json
import math
import sys
import time

import numpy as np

from rpkit import ann
from rpkit.core import MAX_SWEEPS, RANK_RTOL, RngStream, jacobi_tolerance
from rpkit.kernels import available_backends, load_backend


def _cases():
    rng = RngStream(2024, 0)
    square = rng.gaussian(48 * 48).reshape(48, 48)
    sensing = rng.gaussian(12 * 24).reshape(12, 24) / math.sqrt(12)
    tall = rng.gaussian(40 * 30).reshape(40, 30)
    y = rng.gaussian(40)
    points = rng.gaussian(400 * 32).reshape(400, 32)
    data = rng.gaussian(4000 * 32).reshape(4000, 32)
    leaves = ann._max_leaves(4000, 16)
    pool = rng.gaussian(leaves * 32).reshape(leaves, 32)
    stacked = ann.build_forest(data, 10, 16, seed=1)._stacked
    q = data[7] + 0.1
    return {
        "splitmix64_block": lambda k: k.splitmix64_block(np.uint64(12345), 0, 1_000_000),
        "jacobi_singular_values": lambda k: k.jacobi_singular_values(square, MAX_SWEEPS, jacobi_tolerance(48)),
        "lstsq": lambda k: k.lstsq(tall, y, RANK_RTOL),
        "rip_scan": lambda k: k.rip_scan(sensing, 3, MAX_SWEEPS, jacobi_tolerance(12)),
        "subset_lstsq_scan": lambda k: k.subset_lstsq_scan(sensing, sensing[:, 3] - sensing[:, 9], 2, RANK_RTOL),
        "pairwise_distances": lambda k: k.pairwise_distances(points),
        "build_tree": lambda k: k.build_tree(data, pool, 16, 2 * leaves - 1),
        "collect_candidates": lambda k: k.collect_candidates(*stacked, q, 200),
    }


def best_time(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--output")
    args = ap.parse_args(argv)
    backends = {name: load_backend(name) for name in available_backends()}
    results = {}
    for name, case in _cases().items():
        row = {}
        for bname, mod in backends.items():
            case(mod)  # warm-up, includes JIT compilation for numba
            row[bname] = best_time(lambda: case(mod), args.repeat)
        if "numba" in row:
            row["numpy_over_numba"] = row["numpy"] / row["numba"]
        results[name] = row
        print(f"{name:24s} " + "  ".join(f"{b}={row[b] * 1e3:9.3f} ms" for b in backends), file=sys.stderr)
    text = json.dumps({"repeat": args.repeat, "kernels": results}, indent=2)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    print(text)


if __name__ == "__main__":
    main()
