# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled kernels; same contracts as ``pure.py``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY
from libcpp.algorithm cimport sort
from libcpp.pair cimport pair
from libcpp.vector cimport vector


def best_split(double[:, ::1] x, double[::1] y):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef int best_f = -1
    cdef double best_thr = 0.0
    cdef double best_sse = INFINITY
    cdef Py_ssize_t f, i, k
    cdef double total, total_sq, left_sum, left_sq, sse, yi
    cdef vector[pair[double, double]] col
    if n < 2:
        return best_f, best_thr, best_sse
    col.resize(n)
    for f in range(d):
        for i in range(n):
            col[i].first = x[i, f]
            col[i].second = y[i]
        sort(col.begin(), col.end())
        total = 0.0
        total_sq = 0.0
        for i in range(n):
            yi = col[i].second
            total += yi
            total_sq += yi * yi
        left_sum = 0.0
        left_sq = 0.0
        for k in range(1, n):
            yi = col[k - 1].second
            left_sum += yi
            left_sq += yi * yi
            if col[k].first > col[k - 1].first:
                sse = (left_sq - left_sum * left_sum / k) + (
                    (total_sq - left_sq)
                    - (total - left_sum) * (total - left_sum) / (n - k)
                )
                if sse < best_sse:
                    best_sse = sse
                    best_f = <int> f
                    best_thr = (col[k - 1].first + col[k].first) / 2.0
    return best_f, best_thr, best_sse


def tree_apply(cnp.int32_t[::1] feature, double[::1] threshold,
               cnp.int32_t[::1] left, cnp.int32_t[::1] right,
               double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.int64_t[::1] out = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t i
    cdef cnp.int64_t node
    cdef int f
    for i in range(n):
        node = 0
        f = feature[node]
        while f >= 0:
            if x[i, f] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
            f = feature[node]
        out[i] = node
    return np.asarray(out)


def forest_apply(cnp.int32_t[:, ::1] features, double[:, ::1] thresholds,
                 cnp.int32_t[:, ::1] lefts, cnp.int32_t[:, ::1] rights,
                 double[:, ::1] values, double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_trees = features.shape[0]
    cdef double[::1] out = np.zeros(n)
    cdef Py_ssize_t i, t
    cdef cnp.int64_t node
    cdef int f
    cdef double acc
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            node = 0
            f = features[t, node]
            while f >= 0:
                if x[i, f] <= thresholds[t, node]:
                    node = lefts[t, node]
                else:
                    node = rights[t, node]
                f = features[t, node]
            acc += values[t, node]
        out[i] = acc
    return np.asarray(out)


def sumtree_set(double[::1] sums, double[::1] maxs, Py_ssize_t capacity,
                Py_ssize_t leaf, double value):
    cdef Py_ssize_t i = capacity + leaf
    cdef double m, r
    sums[i] = value
    maxs[i] = value
    i >>= 1
    while i >= 1:
        sums[i] = sums[2 * i] + sums[2 * i + 1]
        m = maxs[2 * i]
        r = maxs[2 * i + 1]
        maxs[i] = m if m >= r else r
        i >>= 1


def sumtree_find(double[::1] sums, Py_ssize_t capacity, double[::1] targets):
    cdef Py_ssize_t b = targets.shape[0]
    cdef cnp.int64_t[::1] out = np.empty(b, dtype=np.int64)
    cdef Py_ssize_t j, i
    cdef double t
    for j in range(b):
        t = targets[j]
        i = 1
        while i < capacity:
            if t < sums[2 * i]:
                i = 2 * i
            else:
                t -= sums[2 * i]
                i = 2 * i + 1
        out[j] = i - capacity
    return np.asarray(out)
