"""Static Hilbert-packed R-tree over inclusive integer rectangles.

Entries are sorted along an order-16 Hilbert curve over the extent of their
centers and packed bottom-up into nodes of ``fanout`` children. Queries use
closed-interval intersection, so rectangles that only touch still match.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .maskdata import ObjectSet, Rect

HILBERT_ORDER = 16
DEFAULT_FANOUT = 16


def hilbert_ranks(centers_x: np.ndarray, centers_y: np.ndarray, order: int = HILBERT_ORDER) -> np.ndarray:
    """Hilbert distance of each center after scaling the extent onto the curve grid.

    A degenerate axis (zero extent) maps every center to cell 0 along it.
    """
    side = (1 << order) - 1
    out = []
    for c in (np.asarray(centers_x, dtype=float), np.asarray(centers_y, dtype=float)):
        if c.size == 0:
            out.append(np.zeros(0, dtype=np.uint32))
            continue
        lo, hi = float(c.min()), float(c.max())
        if hi > lo:
            cells = np.floor((c - lo) / (hi - lo) * side)
        else:
            cells = np.zeros_like(c)
        out.append(cells.astype(np.uint32))
    return _kernels.hilbert_index(out[0], out[1], order)


class SpatialIndex:
    """Immutable packed R-tree. Build with :func:`bulk_load`."""

    def __init__(self, ids: np.ndarray, boxes: np.ndarray, fanout: int) -> None:
        self.fanout = fanout
        self.ids = ids                  # leaf entry ids in Hilbert order
        # levels[0] holds the entry boxes; levels[i] the node boxes of level i
        self.levels: list[np.ndarray] = [boxes]
        while len(self.levels[-1]) > 1:
            below = self.levels[-1]
            groups = [below[i:i + fanout] for i in range(0, len(below), fanout)]
            nodes = np.array(
                [[g[:, 0].min(), g[:, 1].min(), g[:, 2].max(), g[:, 3].max()] for g in groups],
                dtype=np.int64,
            ).reshape(-1, 4)
            self.levels.append(nodes)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def height(self) -> int:
        """Node levels above the entries: ``ceil(log_fanout(n))``, 0 for n <= 1."""
        return len(self.levels) - 1

    def query(self, probe: Rect) -> set[int]:
        return set(self.query_list(probe))

    def query_list(self, probe: Rect) -> list[int]:
        """Ids of intersecting entries, in Hilbert order."""
        if len(self.ids) == 0:
            return []
        px0, py0, px1, py1 = probe
        f = self.fanout
        top = len(self.levels) - 1
        frontier = [(top, 0, len(self.levels[top]))]
        hits: list[int] = []
        while frontier:
            level, lo, hi = frontier.pop()
            b = self.levels[level][lo:hi]
            mask = (b[:, 0] <= px1) & (b[:, 2] >= px0) & (b[:, 1] <= py1) & (b[:, 3] >= py0)
            idx = np.flatnonzero(mask) + lo
            if level == 0:
                hits.extend(self.ids[idx].tolist())
            else:
                below = len(self.levels[level - 1])
                for j in idx[::-1].tolist():
                    frontier.append((level - 1, j * f, min((j + 1) * f, below)))
        return hits

    def iter_leaves(self):
        """Yield the id groups stored in each leaf node."""
        for i in range(0, len(self.ids), self.fanout):
            yield self.ids[i:i + self.fanout].tolist()


def bulk_load(entries: Iterable[tuple[int, Rect]], fanout: int = DEFAULT_FANOUT) -> SpatialIndex:
    if fanout < 2:
        raise ValueError(f"fanout must be >= 2, got {fanout}")
    entries = list(entries)
    if not entries:
        return SpatialIndex(np.zeros(0, dtype=np.int64), np.zeros((0, 4), dtype=np.int64), fanout)
    ids = np.array([e[0] for e in entries], dtype=np.int64)
    boxes = np.array([e[1] for e in entries], dtype=np.int64).reshape(-1, 4)
    if np.any(boxes[:, 0] > boxes[:, 2]) or np.any(boxes[:, 1] > boxes[:, 3]):
        raise ValueError("rectangles need xmin <= xmax and ymin <= ymax")
    cx = (boxes[:, 0] + boxes[:, 2]) / 2.0
    cy = (boxes[:, 1] + boxes[:, 3]) / 2.0
    order = np.argsort(hilbert_ranks(cx, cy), kind="stable")
    return SpatialIndex(ids[order], boxes[order], fanout)


def query(index: SpatialIndex, probe: Rect) -> set[int]:
    return index.query(probe)


def join_rects(rects_a: Sequence[tuple[int, Rect]], rects_b: Sequence[tuple[int, Rect]],
               fanout: int = DEFAULT_FANOUT) -> list[tuple[int, int]]:
    """All (id_a, id_b) pairs with intersecting rectangles, sorted.

    The index is built over the larger side and probed with the smaller.
    """
    if not rects_a or not rects_b:
        return []
    swap = len(rects_a) > len(rects_b)
    probes, indexed = (rects_b, rects_a) if swap else (rects_a, rects_b)
    index = bulk_load(indexed, fanout)
    pairs = []
    for pid, rect in probes:
        for hid in index.query_list(rect):
            pairs.append((hid, pid) if swap else (pid, hid))
    pairs.sort()
    return pairs


def join(set_a: ObjectSet, set_b: ObjectSet, fanout: int = DEFAULT_FANOUT) -> list[tuple[int, int]]:
    """Filter step of a spatial join between two object sets."""
    return join_rects(set_a.rects(), set_b.rects(), fanout)
