from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import hilbert_d2xy, random_blob_mask, random_rects, rects_intersect

from segtune.maskdata import LabelMask, extract_objects
from segtune.spatialindex import bulk_load, hilbert_ranks, join, join_rects, query


def brute_query(entries, probe):
    return {i for i, r in entries if rects_intersect(r, probe)}


def brute_join(a, b):
    return sorted((i, j) for i, ra in a for j, rb in b if rects_intersect(ra, rb))


def test_empty_index():
    idx = bulk_load([])
    assert len(idx) == 0 and idx.height == 0
    assert query(idx, (0, 0, 100, 100)) == set()


def test_single_rect_root_is_leaf():
    idx = bulk_load([(7, (1, 1, 2, 2))])
    assert idx.height == 0
    assert list(idx.iter_leaves()) == [[7]]
    assert query(idx, (0, 0, 1, 1)) == {7}


def test_order1_hilbert_ranks_match_inverse_oracle(kernels):
    for d in range(4):
        x, y = hilbert_d2xy(1, d)
        got = kernels.hilbert_index(np.array([x], dtype=np.uint32), np.array([y], dtype=np.uint32), 1)
        assert int(got[0]) == d
    assert [hilbert_d2xy(1, d) for d in range(4)] == [(0, 0), (0, 1), (1, 1), (1, 0)]


def test_degenerate_extent_ranks_zero():
    assert hilbert_ranks(np.array([3.0, 3.0]), np.array([5.0, 5.0])).tolist() == [0, 0]


def test_touching_and_disjoint_probes():
    idx = bulk_load([(1, (1, 1, 3, 3))])
    assert query(idx, (0, 0, 2, 2)) == {1}
    assert query(idx, (0, 0, 1, 1)) == {1}  # shares a corner pixel
    assert query(bulk_load([(1, (2, 2, 3, 3))]), (0, 0, 1, 1)) == set()


def test_bad_inputs():
    with pytest.raises(ValueError):
        bulk_load([(1, (0, 0, 1, 1))], fanout=1)
    with pytest.raises(ValueError):
        bulk_load([(1, (3, 0, 1, 1))])


@pytest.mark.parametrize("fanout", [2, 4, 16])
def test_random_queries_match_brute_force(backend, fanout):
    rng = np.random.default_rng(2024)
    entries = list(enumerate(random_rects(rng, 200)))
    idx = bulk_load(entries, fanout)
    for probe in random_rects(rng, 50, max_side=200):
        assert idx.query(probe) == brute_query(entries, probe)
        assert len(idx.query_list(probe)) == len(idx.query(probe))  # each id once


@pytest.mark.parametrize("n", [0, 1, 2, 16, 17, 256, 257, 4097])
def test_height_formula(n):
    rng = np.random.default_rng(n)
    idx = bulk_load(list(enumerate(random_rects(rng, n))), 16)
    expected = 0 if n <= 1 else math.ceil(math.log(n, 16) - 1e-12)
    assert idx.height == expected
    ids = [i for leaf in idx.iter_leaves() for i in leaf]
    assert sorted(ids) == list(range(n))


def test_node_boxes_cover_children():
    rng = np.random.default_rng(1)
    idx = bulk_load(list(enumerate(random_rects(rng, 300))), 4)
    for lvl in range(1, len(idx.levels)):
        below, nodes = idx.levels[lvl - 1], idx.levels[lvl]
        for j, node in enumerate(nodes):
            kids = below[j * 4:(j + 1) * 4]
            assert np.all(kids[:, :2] >= node[:2]) and np.all(kids[:, 2:] <= node[2:])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 40), st.integers(0, 40))
def test_probe_monotonicity(seed, grow_x, grow_y):
    rng = np.random.default_rng(seed)
    entries = list(enumerate(random_rects(rng, 60, extent=300)))
    idx = bulk_load(entries, 8)
    x0, y0, x1, y1 = random_rects(rng, 1, extent=300)[0]
    small = idx.query((x0, y0, x1, y1))
    big = idx.query((x0 - grow_x, y0 - grow_y, x1 + grow_x, y1 + grow_y))
    assert small <= big


def test_join_examples():
    rng = np.random.default_rng(4)
    a = list(enumerate(random_rects(rng, 30)))
    assert join_rects([], a) == [] and join_rects(a, []) == []
    self_pairs = join_rects(a, a)
    assert {(i, i) for i, _ in a} <= set(self_pairs)


@pytest.mark.parametrize("sizes", [(40, 90), (90, 40), (1, 1), (150, 150)])
def test_join_matches_nested_loop(sizes):
    rng = np.random.default_rng(sum(sizes))
    a = [(i + 100, r) for i, r in enumerate(random_rects(rng, sizes[0], extent=500))]
    b = [(i + 5000, r) for i, r in enumerate(random_rects(rng, sizes[1], extent=500))]
    got = join_rects(a, b)
    assert got == brute_join(a, b)
    assert got == join_rects(a, b)  # deterministic ordering


def test_join_object_sets():
    rng = np.random.default_rng(8)
    ref = extract_objects(LabelMask(random_blob_mask(rng, (64, 64), 8)), boundaries=False)
    comp = extract_objects(LabelMask(random_blob_mask(rng, (64, 64), 8)), boundaries=False)
    assert join(ref, comp) == brute_join(ref.rects(), comp.rects())
