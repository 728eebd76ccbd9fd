"""Time each kernel under the compiled and the pure-Python backend.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Inputs match the sizes the library uses in practice: 5000 replicator
steps, rank tables for 441 cells of 20 factors, and a coverage scan over
11 levels.
"""

from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from squaregrowth._kernels import _pure

try:
    from squaregrowth._kernels import _core
except ImportError:
    _core = None

RPS = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])


def cases(rng: np.random.Generator) -> dict:
    x0 = np.full(3, 1 / 3)
    noise = rng.normal(0.0, 0.1, size=(5000, 3))
    counts = rng.integers(0, 1000, size=(441, 20))
    ranks = (np.argsort(rng.random((441, 20)), axis=1) + 1).astype(np.int32)
    level = rng.integers(0, 11, 441).astype(np.int64)
    return {
        "replicator_run": lambda k: k.replicator_run(RPS, RPS, x0, x0, noise, 0.01),
        "cell_ranks": lambda k: k.cell_ranks(counts),
        "coverage_scan": lambda k: k.coverage_scan(ranks, level, 11),
    }


def best_of(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def main(argv=None) -> dict:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--json", help="also write results here")
    args = parser.parse_args(argv)

    results = {}
    for name, call in cases(np.random.default_rng(args.seed)).items():
        row = {"python": best_of(lambda: call(_pure), args.repeat)}
        if _core is not None:
            row["cython"] = best_of(lambda: call(_core), args.repeat)
            row["speedup"] = row["python"] / row["cython"]
        results[name] = row

    print(f"{'kernel':<16}{'python (ms)':>14}{'cython (ms)':>14}{'speedup':>10}")
    for name, row in results.items():
        cy = f"{row['cython'] * 1e3:14.3f}{row['speedup']:9.1f}x" if "cython" in row else f"{'n/a':>14}{'':>10}"
        print(f"{name:<16}{row['python'] * 1e3:14.3f}{cy}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)
    return results


if __name__ == "__main__":
    main()
