"""Segmentation agreement metrics.

Pixel-level metrics compare the nonzero pixel sets of two masks. The
object-level average Dice is reference-anchored: every reference object is
matched to the computed object it overlaps most (filter candidates with the
R-tree join, refine by exact pixel counts), unmatched reference objects
score 0 and the mean is taken over reference objects.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, ShapeError
from .maskdata import LabelMask, ObjectSet, extract_objects
from .spatialindex import join


def _check(a: LabelMask, b: LabelMask) -> tuple[np.ndarray, np.ndarray]:
    if a.shape != b.shape:
        raise ShapeError(f"mask shapes differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    return a.labels != 0, b.labels != 0


def _counts(a: LabelMask, b: LabelMask) -> tuple[int, int, int]:
    fa, fb = _check(a, b)
    inter = int(np.count_nonzero(fa & fb))
    return inter, int(np.count_nonzero(fa)), int(np.count_nonzero(fb))


def pixel_dice(a: LabelMask, b: LabelMask) -> float:
    inter, na, nb = _counts(a, b)
    if na + nb == 0:
        return 1.0
    return 2.0 * inter / (na + nb)


def pixel_jaccard(a: LabelMask, b: LabelMask) -> float:
    inter, na, nb = _counts(a, b)
    union = na + nb - inter
    if union == 0:
        return 1.0
    return inter / union


def area_metrics(a: LabelMask, b: LabelMask) -> tuple[int, int]:
    """(overlap, non-overlap) pixel counts: |A&B| and |A\\B| + |B\\A|."""
    inter, na, nb = _counts(a, b)
    return inter, na + nb - 2 * inter


@dataclass
class MetricReport:
    pixel_dice: float
    pixel_jaccard: float
    avg_object_dice: float
    overlap_area: int
    non_overlap_area: int
    matched_pairs: list[tuple[int, int, float]] = field(default_factory=list)
    unmatched_ref: list[int] = field(default_factory=list)
    unmatched_comp: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["matched_pairs"] = [list(p) for p in self.matched_pairs]
        return d


def object_matches(ref: LabelMask, comp: LabelMask,
                   ref_objects: ObjectSet | None = None,
                   comp_objects: ObjectSet | None = None) -> tuple[list[tuple[int, int, float]], list[int], ObjectSet, ObjectSet]:
    """Best computed match for each reference object.

    Returns ``(matched, unmatched_ref, ref_objects, comp_objects)`` where
    ``matched`` holds ``(ref label, comp label, pair dice)``.
    """
    _check(ref, comp)
    if ref_objects is None:
        ref_objects = extract_objects(ref, boundaries=False)
    if comp_objects is None:
        comp_objects = extract_objects(comp, boundaries=False)
    pairs = join(ref_objects, comp_objects)
    ref_area = ref_objects.areas()
    comp_area = comp_objects.areas()
    best: dict[int, tuple[int, int]] = {}
    if pairs:
        ref_rect = dict(ref_objects.rects())
        comp_rect = dict(comp_objects.rects())
        windows = np.empty((len(pairs), 4), dtype=np.int64)
        for i, (r, c) in enumerate(pairs):
            a, b = ref_rect[r], comp_rect[c]
            windows[i] = (max(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), min(a[3], b[3]))
        counts = _kernels.pair_overlaps(ref.labels, comp.labels, np.asarray(pairs, dtype=np.int64), windows)
        # pairs are sorted by (ref, comp): a strict > keeps the lower comp label on ties
        for (r, c), n in zip(pairs, counts.tolist()):
            if n > 0 and (r not in best or n > best[r][1]):
                best[r] = (c, n)
    matched = []
    unmatched = []
    for r in ref_objects.labels:
        if r in best:
            c, n = best[r]
            matched.append((r, c, 2.0 * n / (ref_area[r] + comp_area[c])))
        else:
            unmatched.append(r)
    return matched, unmatched, ref_objects, comp_objects


def avg_object_dice(ref: LabelMask, comp: LabelMask,
                    ref_objects: ObjectSet | None = None,
                    comp_objects: ObjectSet | None = None) -> tuple[float, MetricReport]:
    matched, unmatched, ref_objects, comp_objects = object_matches(ref, comp, ref_objects, comp_objects)
    if len(ref_objects) == 0:
        avg = 1.0 if len(comp_objects) == 0 else 0.0
    else:
        avg = sum(d for _, _, d in matched) / len(ref_objects)
    used = {c for _, c, _ in matched}
    overlap, non_overlap = area_metrics(ref, comp)
    report = MetricReport(
        pixel_dice=pixel_dice(ref, comp),
        pixel_jaccard=pixel_jaccard(ref, comp),
        avg_object_dice=avg,
        overlap_area=overlap,
        non_overlap_area=non_overlap,
        matched_pairs=matched,
        unmatched_ref=unmatched,
        unmatched_comp=[c for c in comp_objects.labels if c not in used],
    )
    return avg, report


def object_dice(computed: LabelMask, reference: LabelMask) -> float:
    return avg_object_dice(reference, computed)[0]


METRICS: dict[str, Callable[[LabelMask, LabelMask], float]] = {
    "object-dice": object_dice,
    "pixel-dice": lambda computed, reference: pixel_dice(computed, reference),
    "pixel-jaccard": lambda computed, reference: pixel_jaccard(computed, reference),
}


def metric_fn(name: str) -> Callable[[LabelMask, LabelMask], float]:
    try:
        return METRICS[name]
    except KeyError:
        raise ConfigError(f"unknown quality metric {name!r}; choose from {sorted(METRICS)}") from None


def dataset_metric(pairs: Sequence[tuple[LabelMask, LabelMask]], metric: str = "object-dice") -> float:
    """Unweighted mean of a per-image metric over (computed, reference) pairs."""
    if not pairs:
        raise ConfigError("dataset_metric needs at least one (computed, reference) pair")
    fn = metric_fn(metric)
    return float(np.mean([fn(c, r) for c, r in pairs]))


def full_report(computed: LabelMask, reference: LabelMask) -> MetricReport:
    return avg_object_dice(reference, computed)[1]
