# Compiled kernel core. Mirrors _kernels_py exactly; keep the two in sync.

import numpy as np

cimport numpy as cnp

cnp.import_array()


def pairwise_iou(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double iw, ih, inter, area_a, area_b, union
    for i in range(n):
        area_a = (a[i, 2] - a[i, 0]) * (a[i, 3] - a[i, 1])
        for j in range(m):
            iw = min(a[i, 2], b[j, 2]) - max(a[i, 0], b[j, 0])
            ih = min(a[i, 3], b[j, 3]) - max(a[i, 1], b[j, 1])
            if iw <= 0.0 or ih <= 0.0:
                inter = 0.0
            else:
                inter = iw * ih
            area_b = (b[j, 2] - b[j, 0]) * (b[j, 3] - b[j, 1])
            union = area_a + area_b - inter
            if union > 0.0:
                out[i, j] = inter / union
    return out_arr


def pairwise_oar(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double iw, ih, inter, area_a
    for i in range(n):
        area_a = (a[i, 2] - a[i, 0]) * (a[i, 3] - a[i, 1])
        if area_a <= 0.0:
            continue
        for j in range(m):
            iw = min(a[i, 2], b[j, 2]) - max(a[i, 0], b[j, 0])
            ih = min(a[i, 3], b[j, 3]) - max(a[i, 1], b[j, 1])
            if iw <= 0.0 or ih <= 0.0:
                continue
            out[i, j] = iw * ih / area_a
    return out_arr


def greedy_keep(double[:, ::1] boxes, cnp.int64_t[::1] order, double threshold, bint use_oar):
    cdef Py_ssize_t n = order.shape[0]
    kept_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] kept = kept_arr
    sup_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] sup = sup_arr
    cdef Py_ssize_t i, j, n_kept = 0
    cdef cnp.int64_t bi, bj
    cdef double iw, ih, inter, area_i, area_j, denom, metric
    for i in range(n):
        if sup[i]:
            continue
        bi = order[i]
        kept[n_kept] = bi
        n_kept += 1
        area_i = (boxes[bi, 2] - boxes[bi, 0]) * (boxes[bi, 3] - boxes[bi, 1])
        for j in range(i + 1, n):
            if sup[j]:
                continue
            bj = order[j]
            iw = min(boxes[bi, 2], boxes[bj, 2]) - max(boxes[bi, 0], boxes[bj, 0])
            ih = min(boxes[bi, 3], boxes[bj, 3]) - max(boxes[bi, 1], boxes[bj, 1])
            if iw <= 0.0 or ih <= 0.0:
                inter = 0.0
            else:
                inter = iw * ih
            area_j = (boxes[bj, 2] - boxes[bj, 0]) * (boxes[bj, 3] - boxes[bj, 1])
            if use_oar:
                denom = area_j
            else:
                denom = area_i + area_j - inter
            if denom > 0.0:
                metric = inter / denom
            else:
                metric = 0.0
            if metric >= threshold:
                sup[j] = 1
    return kept_arr[:n_kept].copy()
