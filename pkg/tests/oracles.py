"""Independent reference implementations used as test oracles.

They are deliberately naive (explicit loops, no shared code with the
package) so agreement is meaningful.
"""
from __future__ import annotations

from collections import deque

import numpy as np


def flood_labels(binary, connectivity: int = 8) -> np.ndarray:
    """BFS labeling; labels handed out in raster order of each region's first pixel."""
    grid = np.asarray(binary) != 0
    h, w = grid.shape
    out = np.zeros((h, w), dtype=np.int64)
    if connectivity == 4:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        steps = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
    nxt = 0
    for y in range(h):
        for x in range(w):
            if grid[y, x] and out[y, x] == 0:
                nxt += 1
                out[y, x] = nxt
                queue = deque([(y, x)])
                while queue:
                    cy, cx = queue.popleft()
                    for dy, dx in steps:
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and grid[ny, nx] and out[ny, nx] == 0:
                            out[ny, nx] = nxt
                            queue.append((ny, nx))
    return out


def pixel_counts(a, b) -> tuple[int, int, int]:
    """(|A and B|, |A|, |B|) by a double loop over pixels."""
    a, b = np.asarray(a), np.asarray(b)
    inter = na = nb = 0
    for y in range(a.shape[0]):
        for x in range(a.shape[1]):
            pa, pb = a[y, x] != 0, b[y, x] != 0
            na += pa
            nb += pb
            inter += pa and pb
    return int(inter), int(na), int(nb)


def brute_object_dice(ref, comp) -> float:
    """Reference-anchored average Dice with a full-image count for every label pair."""
    ref, comp = np.asarray(ref), np.asarray(comp)
    ref_labels = sorted(int(v) for v in np.unique(ref) if v != 0)
    comp_labels = sorted(int(v) for v in np.unique(comp) if v != 0)
    if not ref_labels:
        return 1.0 if not comp_labels else 0.0
    total = 0.0
    for r in ref_labels:
        rmask = ref == r
        best_c, best_n = None, 0
        for c in comp_labels:
            n = int(np.sum(rmask & (comp == c)))
            if n > best_n:
                best_c, best_n = c, n
        if best_c is not None:
            total += 2.0 * best_n / (int(rmask.sum()) + int((comp == best_c).sum()))
    return total / len(ref_labels)


def rects_intersect(a, b) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def hilbert_d2xy(order: int, d: int) -> tuple[int, int]:
    """Distance along the curve to (x, y): the inverse direction of the package kernel."""
    n = 1 << order
    x = y = 0
    t = d
    s = 1
    while s < n:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        if ry == 0:
            if rx == 1:
                x, y = s - 1 - x, s - 1 - y
            x, y = y, x
        x += s * rx
        y += s * ry
        t //= 4
        s *= 2
    return x, y


def random_rects(rng: np.random.Generator, n: int, extent: int = 1000, max_side: int = 60):
    x0 = rng.integers(0, extent, n)
    y0 = rng.integers(0, extent, n)
    return [(int(a), int(b), int(a + rng.integers(0, max_side)), int(b + rng.integers(0, max_side)))
            for a, b in zip(x0, y0)]


def random_blob_mask(rng: np.random.Generator, shape=(64, 64), blobs: int = 6, max_r: int = 9) -> np.ndarray:
    """Labeled mask of random overlapping-allowed discs/rectangles (later ones overwrite)."""
    h, w = shape
    out = np.zeros(shape, dtype=np.int32)
    yy, xx = np.mgrid[0:h, 0:w]
    for lab in range(1, blobs + 1):
        cy, cx = rng.integers(0, h), rng.integers(0, w)
        r = rng.integers(1, max_r)
        if rng.random() < 0.5:
            region = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        else:
            region = (abs(yy - cy) <= r) & (abs(xx - cx) <= rng.integers(1, max_r))
        out[region] = lab
    return out


def union_find_count(binary, connectivity: int = 8) -> int:
    """Number of connected regions via a plain union-find over pixel indices."""
    grid = np.asarray(binary) != 0
    h, w = grid.shape
    parent = list(range(h * w))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    back = [(0, -1), (-1, 0)] if connectivity == 4 else [(0, -1), (-1, -1), (-1, 0), (-1, 1)]
    for y in range(h):
        for x in range(w):
            if not grid[y, x]:
                continue
            for dy, dx in back:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and grid[ny, nx]:
                    parent[find(ny * w + nx)] = find(y * w + x)
    return len({find(y * w + x) for y in range(h) for x in range(w) if grid[y, x]})
