# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scoring and metric kernels."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef void _scores(const double[:, ::1] m, const double[::1] q, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(m.shape[0]):
        acc = 0.0
        for j in range(m.shape[1]):
            acc = acc + m[i, j] * q[j]
        out[i] = acc


def scores(matrix, query):
    cdef const double[:, ::1] m = np.ascontiguousarray(matrix, dtype=np.float64)
    cdef const double[::1] q = np.ascontiguousarray(query, dtype=np.float64)
    out = np.zeros(m.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        _scores(m, q, o)
    return out


cdef inline bint _better(double s1, Py_ssize_t i1, double s2, Py_ssize_t i2) noexcept nogil:
    return s1 > s2 or (s1 == s2 and i1 < i2)


def topk(matrix, query, Py_ssize_t k, mask=None):
    """Indices and scores of the k best rows, ordered by (-score, row index)."""
    cdef const double[:, ::1] m = np.ascontiguousarray(matrix, dtype=np.float64)
    cdef const double[::1] q = np.ascontiguousarray(query, dtype=np.float64)
    cdef Py_ssize_t n = m.shape[0], d = m.shape[1]
    cdef const unsigned char[::1] keep
    cdef bint use_mask = mask is not None
    if use_mask:
        keep = np.ascontiguousarray(mask, dtype=np.uint8)
    if k > n:
        k = n
    if k <= 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    best_i = np.empty(k, dtype=np.int64)
    best_s = np.empty(k, dtype=np.float64)
    cdef cnp.int64_t[::1] bi = best_i
    cdef double[::1] bs = best_s
    cdef Py_ssize_t filled = 0, i, j, pos
    cdef double acc
    with nogil:
        for i in range(n):
            if use_mask and not keep[i]:
                continue
            acc = 0.0
            for j in range(d):
                acc = acc + m[i, j] * q[j]
            if filled == k and not _better(acc, i, bs[k - 1], bi[k - 1]):
                continue
            pos = filled if filled < k else k - 1
            while pos > 0 and _better(acc, i, bs[pos - 1], bi[pos - 1]):
                bs[pos] = bs[pos - 1]
                bi[pos] = bi[pos - 1]
                pos -= 1
            bs[pos] = acc
            bi[pos] = i
            if filled < k:
                filled += 1
    return best_i[:filled].copy(), best_s[:filled].copy()


def mean_of_means(values, offsets):
    """Per-group arithmetic means of a ragged array and the mean over groups."""
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const cnp.int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t n = off.shape[0] - 1, i, j
    per = np.zeros(n if n > 0 else 0, dtype=np.float64)
    cdef double[::1] p = per
    cdef double acc, total = 0.0
    for i in range(n):
        acc = 0.0
        for j in range(off[i], off[i + 1]):
            acc = acc + v[j]
        p[i] = acc / (off[i + 1] - off[i]) if off[i + 1] > off[i] else 0.0
        total = total + p[i]
    return per, (total / n if n > 0 else 0.0)


def contextual_precision(relevance, offsets):
    """Rank-weighted precision per group; a group without relevant entries scores 0."""
    cdef const double[::1] r = np.ascontiguousarray(relevance, dtype=np.float64)
    cdef const cnp.int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t n = off.shape[0] - 1, i, j
    per = np.zeros(n if n > 0 else 0, dtype=np.float64)
    cdef double[::1] p = per
    cdef double cum, acc
    for i in range(n):
        cum = 0.0
        acc = 0.0
        for j in range(off[i], off[i + 1]):
            cum = cum + r[j]
            acc = acc + (cum / (j - off[i] + 1)) * r[j]
        p[i] = acc / cum if cum > 0.0 else 0.0
    return per
