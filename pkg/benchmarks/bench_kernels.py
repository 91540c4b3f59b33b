"""Benchmark the compiled kernel core against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 100,500,2000]
"""

import argparse
import time

import numpy as np

from ovpost import kernels


def _random_boxes(rng, n):
    xy = rng.uniform(0, 2000, size=(n, 2))
    wh = rng.uniform(4, 200, size=(n, 2))
    return np.ascontiguousarray(np.hstack([xy, xy + wh]))


def _time(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="100,500,2000")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (selected: {kernels.BACKEND})")
    rng = np.random.default_rng(0)
    header = f"{'kernel':<16} {'n':>6} " + " ".join(f"{b:>12}" for b in backends)
    print(header)
    print("-" * len(header))
    for n in sizes:
        boxes = _random_boxes(rng, n)
        scores = rng.uniform(0, 1, size=n)
        order = kernels.suppression_order(boxes, scores)
        rows = {
            "pairwise_iou": lambda impl: impl.pairwise_iou(boxes, boxes),
            "pairwise_oar": lambda impl: impl.pairwise_oar(boxes, boxes),
            "greedy nms": lambda impl: impl.greedy_keep(boxes, order, 0.5, False),
            "greedy pos": lambda impl: impl.greedy_keep(boxes, order, 0.5, True),
        }
        for name, fn in rows.items():
            times = [_time(lambda b=impl: fn(b)) for impl in backends.values()]
            cells = " ".join(f"{t * 1e3:>10.2f}ms" for t in times)
            print(f"{name:<16} {n:>6} {cells}")
        # sanity: identical outputs
        outs = [impl.greedy_keep(boxes, order, 0.5, True) for impl in backends.values()]
        for other in outs[1:]:
            assert np.array_equal(outs[0], other)
    print("outputs verified identical across backends")


if __name__ == "__main__":
    main()
