"""Pure Python/numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or when
``SEGTUNE_PURE_PYTHON=1`` is set. Results are identical to ``_ckernels``.
"""
from __future__ import annotations

import numpy as np


def _runs(row: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    padded = np.concatenate(([0], (row != 0).view(np.int8), [0]))
    d = np.diff(padded)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1) - 1
    return starts, ends


def label(binary: np.ndarray, connectivity: int) -> tuple[np.ndarray, int]:
    """Run-length union-find labeling in raster first-touch order."""
    img = np.ascontiguousarray(binary, dtype=np.uint8)
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.int32)
    slack = 1 if connectivity == 8 else 0

    run_row: list[int] = []
    run_start: list[int] = []
    run_end: list[int] = []
    parent: list[int] = []

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    prev: list[int] = []
    for y in range(h):
        starts, ends = _runs(img[y])
        cur: list[int] = []
        j = 0
        for s, e in zip(starts.tolist(), ends.tolist()):
            rid = len(parent)
            parent.append(rid)
            run_row.append(y)
            run_start.append(s)
            run_end.append(e)
            cur.append(rid)
            # skip previous-row runs that end before this one can touch them
            while j < len(prev) and run_end[prev[j]] + slack < s:
                j += 1
            t = j
            while t < len(prev) and run_start[prev[t]] - slack <= e:
                a, b = find(rid), find(prev[t])
                if a != b:
                    parent[max(a, b)] = min(a, b)
                t += 1
        prev = cur

    remap: dict[int, int] = {}
    for rid in range(len(parent)):
        root = find(rid)
        lab = remap.get(root)
        if lab is None:
            lab = len(remap) + 1
            remap[root] = lab
        out[run_row[rid], run_start[rid]:run_end[rid] + 1] = lab
    return out, len(remap)


def object_stats(labels: np.ndarray, n: int):
    lab = np.asarray(labels, dtype=np.int64)
    h, w = lab.shape
    area = np.zeros(n + 1, dtype=np.int64)
    xmin = np.full(n + 1, w, dtype=np.int64)
    ymin = np.full(n + 1, h, dtype=np.int64)
    xmax = np.full(n + 1, -1, dtype=np.int64)
    ymax = np.full(n + 1, -1, dtype=np.int64)
    ys, xs = np.nonzero((lab > 0) & (lab <= n))
    vals = lab[ys, xs]
    area += np.bincount(vals, minlength=n + 1)[: n + 1]
    np.minimum.at(xmin, vals, xs)
    np.minimum.at(ymin, vals, ys)
    np.maximum.at(xmax, vals, xs)
    np.maximum.at(ymax, vals, ys)
    return area, xmin, ymin, xmax, ymax


def hilbert_index(xs, ys, order: int) -> np.ndarray:
    x = np.asarray(xs, dtype=np.uint64).copy()
    y = np.asarray(ys, dtype=np.uint64).copy()
    side = np.uint64(1 << order)
    one = np.uint64(1)
    d = np.zeros(x.shape, dtype=np.uint64)
    s = np.uint64(1 << order) >> one
    while s > 0:
        rx = ((x & s) > 0).astype(np.uint64)
        ry = ((y & s) > 0).astype(np.uint64)
        d += s * s * ((np.uint64(3) * rx) ^ ry)
        flip = (ry == 0) & (rx == 1)
        x = np.where(flip, side - one - x, x)
        y = np.where(flip, side - one - y, y)
        swap = ry == 0
        x, y = np.where(swap, y, x), np.where(swap, x, y)
        s >>= one
    return d


def pair_overlaps(ref: np.ndarray, comp: np.ndarray, pairs, windows) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    windows = np.asarray(windows, dtype=np.int64).reshape(-1, 4)
    out = np.zeros(len(pairs), dtype=np.int64)
    for i, ((r, c), (x0, y0, x1, y1)) in enumerate(zip(pairs.tolist(), windows.tolist())):
        a = ref[y0:y1 + 1, x0:x1 + 1]
        b = comp[y0:y1 + 1, x0:x1 + 1]
        out[i] = np.count_nonzero((a == r) & (b == c))
    return out
