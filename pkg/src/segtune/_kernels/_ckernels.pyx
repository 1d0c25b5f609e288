# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Signatures mirror ``_pykernels`` exactly."""
import numpy as np

cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint8_t, uint32_t, uint64_t

cnp.import_array()


cdef inline int32_t _find(int32_t[::1] parent, int32_t i) noexcept nogil:
    cdef int32_t root = i
    while parent[root] != root:
        root = parent[root]
    cdef int32_t nxt
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


cdef inline int32_t _union(int32_t[::1] parent, int32_t a, int32_t b) noexcept nogil:
    a = _find(parent, a)
    b = _find(parent, b)
    if a < b:
        parent[b] = a
        return a
    if b < a:
        parent[a] = b
    return a if a < b else b


def label(binary, int connectivity):
    cdef const uint8_t[:, ::1] img = np.ascontiguousarray(binary, dtype=np.uint8)
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    out_arr = np.zeros((h, w), dtype=np.int32)
    cdef int32_t[:, ::1] out = out_arr
    parent_arr = np.zeros(h * w + 1, dtype=np.int32)
    cdef int32_t[::1] parent = parent_arr
    remap_arr = np.zeros(h * w + 1, dtype=np.int32)
    cdef int32_t[::1] remap = remap_arr
    cdef Py_ssize_t y, x
    cdef int32_t nxt = 0, cur, lab, n = 0
    cdef bint eight = connectivity == 8
    with nogil:
        for y in range(h):
            for x in range(w):
                if img[y, x] == 0:
                    continue
                cur = 0
                if x > 0 and out[y, x - 1]:
                    cur = out[y, x - 1]
                if y > 0:
                    if out[y - 1, x]:
                        cur = _union(parent, cur, out[y - 1, x]) if cur else out[y - 1, x]
                    if eight:
                        if x > 0 and out[y - 1, x - 1]:
                            cur = _union(parent, cur, out[y - 1, x - 1]) if cur else out[y - 1, x - 1]
                        if x + 1 < w and out[y - 1, x + 1]:
                            cur = _union(parent, cur, out[y - 1, x + 1]) if cur else out[y - 1, x + 1]
                if cur == 0:
                    nxt += 1
                    parent[nxt] = nxt
                    cur = nxt
                out[y, x] = cur
        for y in range(h):
            for x in range(w):
                cur = out[y, x]
                if cur == 0:
                    continue
                cur = _find(parent, cur)
                lab = remap[cur]
                if lab == 0:
                    n += 1
                    remap[cur] = n
                    lab = n
                out[y, x] = lab
    return out_arr, int(n)


def object_stats(labels, int n):
    cdef const int32_t[:, ::1] lab = np.ascontiguousarray(labels, dtype=np.int32)
    cdef Py_ssize_t h = lab.shape[0], w = lab.shape[1]
    area_arr = np.zeros(n + 1, dtype=np.int64)
    xmin_arr = np.full(n + 1, w, dtype=np.int64)
    ymin_arr = np.full(n + 1, h, dtype=np.int64)
    xmax_arr = np.full(n + 1, -1, dtype=np.int64)
    ymax_arr = np.full(n + 1, -1, dtype=np.int64)
    cdef int64_t[::1] area = area_arr, xmin = xmin_arr, ymin = ymin_arr
    cdef int64_t[::1] xmax = xmax_arr, ymax = ymax_arr
    cdef Py_ssize_t y, x
    cdef int32_t v
    with nogil:
        for y in range(h):
            for x in range(w):
                v = lab[y, x]
                if v <= 0 or v > n:
                    continue
                area[v] += 1
                if x < xmin[v]:
                    xmin[v] = x
                if x > xmax[v]:
                    xmax[v] = x
                if y < ymin[v]:
                    ymin[v] = y
                if y > ymax[v]:
                    ymax[v] = y
    return area_arr, xmin_arr, ymin_arr, xmax_arr, ymax_arr


def hilbert_index(xs, ys, int order):
    cdef const uint32_t[::1] xv = np.ascontiguousarray(xs, dtype=np.uint32)
    cdef const uint32_t[::1] yv = np.ascontiguousarray(ys, dtype=np.uint32)
    cdef Py_ssize_t m = xv.shape[0], i
    out_arr = np.zeros(m, dtype=np.uint64)
    cdef uint64_t[::1] out = out_arr
    cdef uint64_t side = (<uint64_t>1) << order
    cdef uint64_t s, rx, ry, d, x, y, t
    with nogil:
        for i in range(m):
            x = xv[i]
            y = yv[i]
            d = 0
            s = side >> 1
            while s > 0:
                rx = 1 if (x & s) else 0
                ry = 1 if (y & s) else 0
                d += s * s * ((3 * rx) ^ ry)
                if ry == 0:
                    if rx == 1:
                        x = side - 1 - x
                        y = side - 1 - y
                    t = x
                    x = y
                    y = t
                s >>= 1
            out[i] = d
    return out_arr


def pair_overlaps(ref, comp, pairs, windows):
    cdef const int32_t[:, ::1] a = np.ascontiguousarray(ref, dtype=np.int32)
    cdef const int32_t[:, ::1] b = np.ascontiguousarray(comp, dtype=np.int32)
    cdef const int64_t[:, ::1] pr = np.ascontiguousarray(pairs, dtype=np.int64).reshape(-1, 2)
    cdef const int64_t[:, ::1] win = np.ascontiguousarray(windows, dtype=np.int64).reshape(-1, 4)
    cdef Py_ssize_t m = pr.shape[0], i, x, y
    out_arr = np.zeros(m, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    cdef int64_t cnt
    cdef int32_t r, c
    cdef const int32_t* ra
    cdef const int32_t* rb
    with nogil:
        for i in range(m):
            r = <int32_t>pr[i, 0]
            c = <int32_t>pr[i, 1]
            cnt = 0
            for y in range(win[i, 1], win[i, 3] + 1):
                ra = &a[y, 0]
                rb = &b[y, 0]
                for x in range(win[i, 0], win[i, 2] + 1):
                    cnt += (ra[x] == r) & (rb[x] == c)
            out[i] = cnt
    return out_arr
