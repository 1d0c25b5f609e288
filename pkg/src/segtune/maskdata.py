"""Label masks: PGM I/O, connected components and per-object records."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .errors import FormatError

Rect = tuple[int, int, int, int]  # xmin, ymin, xmax, ymax, inclusive


class LabelMask:
    """Immutable 2D grid of nonnegative integer labels (0 = background)."""

    __slots__ = ("_labels", "maxval")

    def __init__(self, labels: np.ndarray | Sequence[Sequence[int]], maxval: int | None = None) -> None:
        arr = np.array(labels, copy=True)
        if arr.ndim != 2:
            raise FormatError(f"label mask must be 2D, got shape {arr.shape}")
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            if not np.all(np.equal(np.mod(arr, 1), 0)):
                raise FormatError("label mask values must be integers")
        if arr.size and arr.min() < 0:
            raise FormatError("label mask values must be >= 0")
        arr = arr.astype(np.int32)
        arr.setflags(write=False)
        self._labels = arr
        self.maxval = maxval

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    @property
    def width(self) -> int:
        return int(self._labels.shape[1])

    @property
    def height(self) -> int:
        return int(self._labels.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def foreground(self) -> np.ndarray:
        return self._labels != 0

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LabelMask) and np.array_equal(self._labels, other._labels)

    def __hash__(self) -> int:
        return hash((self.shape, self._labels.tobytes()))

    def __repr__(self) -> str:
        return f"LabelMask({self.width}x{self.height}, max={int(self._labels.max()) if self._labels.size else 0})"


# -- PGM ---------------------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_mask(data: bytes) -> LabelMask:
    """Parse a binary PGM (P5); 8-bit and 16-bit big-endian samples."""
    if not data.startswith(b"P5"):
        raise FormatError("not a P5 PGM file")
    pos = 2
    fields = []
    for _ in range(3):
        if pos >= len(data) or not data[pos:pos + 1].isspace() and not data[pos:pos + 1] == b"#":
            raise FormatError("malformed PGM header")
        m = _TOKEN.match(data, pos)
        if m is None:
            raise FormatError("truncated PGM header")
        try:
            fields.append(int(m.group(1)))
        except ValueError:
            raise FormatError(f"bad PGM header field {m.group(1)!r}") from None
        pos = m.end()
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"bad PGM dimensions {width}x{height}")
    if not 0 < maxval <= 65535:
        raise FormatError(f"PGM maxval {maxval} outside 1..65535")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError("missing whitespace after PGM maxval")
    pos += 1
    nbytes = 1 if maxval < 256 else 2
    need = width * height * nbytes
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise FormatError(f"truncated PGM payload: {len(payload)} of {need} bytes")
    dtype = np.uint8 if nbytes == 1 else np.dtype(">u2")
    arr = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    if arr.max() > maxval:
        raise FormatError("PGM sample exceeds maxval")
    return LabelMask(arr, maxval=maxval)


def write_mask(mask: LabelMask) -> bytes:
    """Serialize as canonical P5: ``P5\\n<w> <h>\\n<maxval>\\n`` + samples."""
    top = int(mask.labels.max()) if mask.labels.size else 0
    if top > 65535:
        raise FormatError(f"label {top} does not fit a 16-bit PGM")
    maxval = mask.maxval if mask.maxval is not None and mask.maxval >= max(top, 1) else (255 if top < 256 else 65535)
    header = b"P5\n%d %d\n%d\n" % (mask.width, mask.height, maxval)
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    return header + mask.labels.astype(dtype).tobytes()


def load_mask(path: str | Path) -> LabelMask:
    return read_mask(Path(path).read_bytes())


def save_mask(mask: LabelMask, path: str | Path) -> None:
    Path(path).write_bytes(write_mask(mask))


# -- components --------------------------------------------------------------

def connected_components(mask: LabelMask | np.ndarray, connectivity: int = 8) -> LabelMask:
    """Label maximal connected nonzero regions 1..n in raster first-touch order."""
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    arr = mask.labels if isinstance(mask, LabelMask) else np.asarray(mask)
    labels, _ = _kernels.label((arr != 0).astype(np.uint8), connectivity)
    return LabelMask(labels)


def is_binary(mask: LabelMask) -> bool:
    """At most one distinct nonzero value."""
    fg = mask.labels[mask.labels != 0]
    return fg.size == 0 or bool(np.all(fg == fg[0]))


def as_labeled(mask: LabelMask, connectivity: int = 8) -> LabelMask:
    """Label binary masks via connected components; labeled masks pass through."""
    return connected_components(mask, connectivity) if is_binary(mask) else mask


# -- objects -----------------------------------------------------------------

@dataclass(frozen=True)
class MaskObject:
    label: int
    area: int
    mbr: Rect
    boundary: tuple[tuple[int, int], ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class ObjectSet:
    objects: tuple[MaskObject, ...]
    width: int
    height: int

    def __iter__(self) -> Iterator[MaskObject]:
        return iter(self.objects)

    def __len__(self) -> int:
        return len(self.objects)

    @property
    def labels(self) -> list[int]:
        return [o.label for o in self.objects]

    def rects(self) -> list[tuple[int, Rect]]:
        return [(o.label, o.mbr) for o in self.objects]

    def areas(self) -> dict[int, int]:
        return {o.label: o.area for o in self.objects}


def _dense(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map labels to 1..n; returns (dense labels, original label per dense id)."""
    top = int(labels.max()) if labels.size else 0
    if top <= 4 * labels.size + 16:
        return labels, np.arange(top + 1)
    uniq, inv = np.unique(labels, return_inverse=True)
    inv = inv.reshape(labels.shape).astype(np.int32)
    if uniq[0] != 0:
        inv += 1
        uniq = np.concatenate(([0], uniq))
    return inv, uniq


def trace_boundary(inside: np.ndarray, start: tuple[int, int]) -> tuple[tuple[int, int], ...]:
    """Outer contour of the region containing ``start`` on the pixel-corner grid.

    ``inside`` is a boolean image; ``start`` is the region's first pixel in
    raster order, given as ``(x, y)``. Pixel ``(x, y)`` covers the square
    ``[x, x+1] x [y, y+1]``. The contour keeps the region on its left, so its
    shoelace area is positive, and follows diagonal pixel contacts (8-connected
    outline). Only turning vertices are returned; the polygon is closed.
    """
    h, w = inside.shape

    def px(x: int, y: int) -> bool:
        return 0 <= x < w and 0 <= y < h and bool(inside[y, x])

    x0, y0 = start
    vx, vy = x0 + 1, y0
    dx, dy = 1, 0
    verts = [(x0, y0)]
    while True:
        # pixels diagonally ahead-left / ahead-right of the vertex
        lx, ly = vx + (dx - dy - 1) // 2, vy + (dy + dx - 1) // 2
        rx, ry = vx + (dx + dy - 1) // 2, vy + (dy - dx - 1) // 2
        if px(rx, ry):
            ndx, ndy = dy, -dx
        elif px(lx, ly):
            ndx, ndy = dx, dy
        else:
            ndx, ndy = -dy, dx
        if (ndx, ndy) != (dx, dy):
            verts.append((vx, vy))
        if (vx, vy) == (x0, y0) and (ndx, ndy) == (1, 0):
            break
        dx, dy = ndx, ndy
        vx, vy = vx + dx, vy + dy
    if verts[-1] != verts[0]:
        verts.append(verts[0])
    return tuple(verts)


def extract_objects(mask: LabelMask, boundaries: bool = True) -> ObjectSet:
    """One record per distinct nonzero label, ordered by label."""
    dense, original = _dense(mask.labels)
    n = len(original) - 1
    area, xmin, ymin, xmax, ymax = _kernels.object_stats(dense, n)
    objects = []
    for i in np.flatnonzero(area[1:]) + 1:
        rect = (int(xmin[i]), int(ymin[i]), int(xmax[i]), int(ymax[i]))
        boundary: tuple[tuple[int, int], ...] = ()
        if boundaries:
            x0, y0, x1, y1 = rect
            crop = dense[y0:y1 + 1, x0:x1 + 1] == i
            first = int(np.flatnonzero(crop[0])[0])
            local = trace_boundary(crop, (first, 0))
            boundary = tuple((x + x0, y + y0) for x, y in local)
        objects.append(MaskObject(int(original[i]), int(area[i]), rect, boundary))
    return ObjectSet(tuple(objects), mask.width, mask.height)


def shoelace_area(poly: Sequence[tuple[int, int]]) -> float:
    pts = np.asarray(poly, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))
