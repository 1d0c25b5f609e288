"""Compare the compiled kernels with the pure-Python fallback.

Run with ``python benchmarks/bench_kernels.py [--size 512] [--repeat 5]``.
Each kernel is timed on the same inputs under both backends and the best of
``--repeat`` runs is reported together with the speedup.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from segtune import _kernels
from segtune.maskdata import LabelMask, extract_objects
from segtune.spatialindex import join_rects
from segtune.studies import GeneratorParams, generate_scene


def best_time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads(size: int, rng: np.random.Generator):
    count = max(4, size * size // 2000)
    scene = generate_scene((size, size), GeneratorParams(count=count, radius=(3.0, 8.0)), rng)
    binary = (scene.image > 115).astype(np.uint8)
    noisy = (rng.random((size, size)) < 0.45).astype(np.uint8)
    labels, n = _kernels.python.label(binary, 8)
    xs = rng.integers(0, 1 << 16, 200_000).astype(np.uint32)
    ys = rng.integers(0, 1 << 16, 200_000).astype(np.uint32)
    truth = scene.truth.labels
    # realistic refine step: candidate pairs from the R-tree join, windows = MBR intersections
    ref_rects = dict(extract_objects(scene.truth, boundaries=False).rects())
    comp_rects = dict(extract_objects(LabelMask(labels), boundaries=False).rects())
    pairs = np.array(join_rects(list(ref_rects.items()), list(comp_rects.items())), dtype=np.int64).reshape(-1, 2)
    windows = np.array([[max(ref_rects[r][0], comp_rects[c][0]), max(ref_rects[r][1], comp_rects[c][1]),
                         min(ref_rects[r][2], comp_rects[c][2]), min(ref_rects[r][3], comp_rects[c][3])]
                        for r, c in pairs.tolist()], dtype=np.int64).reshape(-1, 4)
    return {
        "label (objects, 8-conn)": lambda k: k.label(binary, 8),
        "label (noise, 4-conn)": lambda k: k.label(noisy, 4),
        "object_stats": lambda k: k.object_stats(labels, n),
        "hilbert_index (200k)": lambda k: k.hilbert_index(xs, ys, 16),
        f"pair_overlaps ({len(pairs)} pairs)": lambda k: k.pair_overlaps(truth, labels, pairs, windows),
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _kernels.compiled is None:
        print("compiled extension not built; only the Python backend is available")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<32}{'compiled ms':>13}{'python ms':>13}{'speedup':>10}")
    for name, run in workloads(args.size, rng).items():
        tc = best_time(lambda: run(_kernels.compiled), args.repeat)
        tp = best_time(lambda: run(_kernels.python), args.repeat)
        print(f"{name:<32}{tc * 1e3:>13.3f}{tp * 1e3:>13.3f}{tp / tc:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
