# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: assignment solver, nearest-embedding labelling, label contingency."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()


cdef Py_ssize_t _augment(const double[:, ::1] cost, Py_ssize_t cur_row,
                         double[::1] u, double[::1] v, Py_ssize_t[::1] path,
                         Py_ssize_t[::1] row4col, double[::1] sp_costs,
                         unsigned char[::1] sr, unsigned char[::1] sc,
                         double* min_val_out) noexcept nogil:
    cdef Py_ssize_t nr = cost.shape[0], nc = cost.shape[1]
    cdef Py_ssize_t i, j, index, sink = -1
    cdef double min_val = 0.0, lowest, r

    for i in range(nr):
        sr[i] = 0
    for j in range(nc):
        sc[j] = 0
        sp_costs[j] = INFINITY

    i = cur_row
    while sink == -1:
        index = -1
        lowest = INFINITY
        sr[i] = 1
        for j in range(nc):
            if sc[j]:
                continue
            r = min_val + cost[i, j] - u[i] - v[j]
            if r < sp_costs[j]:
                path[j] = i
                sp_costs[j] = r
            if sp_costs[j] < lowest or (sp_costs[j] == lowest and index >= 0
                                        and row4col[index] != -1 and row4col[j] == -1):
                lowest = sp_costs[j]
                index = j
        min_val = lowest
        if index < 0 or min_val == INFINITY:
            return -1
        sc[index] = 1
        if row4col[index] == -1:
            sink = index
        else:
            i = row4col[index]
    min_val_out[0] = min_val
    return sink


def linear_sum_assignment(cnp.ndarray cost_in):
    """Minimum-cost assignment for an ``n x m`` matrix with ``n <= m``.

    Returns ``col4row``: the column assigned to each row.
    """
    cdef const double[:, ::1] cost = np.ascontiguousarray(cost_in, dtype=np.float64)
    cdef Py_ssize_t nr = cost.shape[0], nc = cost.shape[1]
    cdef double[::1] u = np.zeros(nr)
    cdef double[::1] v = np.zeros(nc)
    cdef double[::1] sp_costs = np.empty(nc)
    cdef Py_ssize_t[::1] path = np.full(nc, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] col4row = np.full(nr, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] row4col = np.full(nc, -1, dtype=np.intp)
    cdef unsigned char[::1] sr = np.zeros(nr, dtype=np.uint8)
    cdef unsigned char[::1] sc = np.zeros(nc, dtype=np.uint8)
    cdef Py_ssize_t cur_row, sink, i, j, tmp
    cdef double min_val = 0.0

    if nr > nc:
        raise ValueError("cost matrix must have at most as many rows as columns")
    with nogil:
        for cur_row in range(nr):
            sink = _augment(cost, cur_row, u, v, path, row4col, sp_costs, sr, sc, &min_val)
            if sink < 0:
                break
            u[cur_row] += min_val
            for i in range(nr):
                if sr[i] and i != cur_row:
                    u[i] += min_val - sp_costs[col4row[i]]
            for j in range(nc):
                if sc[j]:
                    v[j] -= min_val - sp_costs[j]
            j = sink
            while True:
                i = path[j]
                row4col[j] = i
                tmp = col4row[i]
                col4row[i] = j
                j = tmp
                if i == cur_row:
                    break
    if sink < 0:
        raise ValueError("cost matrix is infeasible")
    return np.asarray(col4row)


def nearest_assign(cnp.ndarray pixels_in, cnp.ndarray centers_in, double threshold):
    """Label each row of ``pixels`` (N x E) with 1 + index of the nearest center
    if that distance is below ``threshold``, else 0. Ties go to the lower index."""
    cdef const double[:, ::1] pix = np.ascontiguousarray(pixels_in, dtype=np.float64)
    cdef const double[:, ::1] cen = np.ascontiguousarray(centers_in, dtype=np.float64)
    cdef Py_ssize_t n = pix.shape[0], k = cen.shape[0], e = pix.shape[1]
    cdef cnp.ndarray out_arr = np.zeros(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t p, c, q, best
    cdef double acc, diff, best_d
    if k == 0:
        return out_arr
    if cen.shape[1] != e:
        raise ValueError("embedding widths differ")
    with nogil:
        for p in range(n):
            best = -1
            best_d = INFINITY
            for c in range(k):
                acc = 0.0
                for q in range(e):
                    diff = pix[p, q] - cen[c, q]
                    acc = acc + diff * diff
                if acc < best_d:
                    best_d = acc
                    best = c
            if best >= 0 and sqrt(best_d) < threshold:
                out[p] = best + 1
    return out_arr


def contingency(cnp.ndarray a_in, cnp.ndarray b_in, Py_ssize_t na, Py_ssize_t nb):
    """Joint label counts of two equal-length non-negative label arrays."""
    cdef const long long[::1] a = np.ascontiguousarray(a_in, dtype=np.int64).ravel()
    cdef const long long[::1] b = np.ascontiguousarray(b_in, dtype=np.int64).ravel()
    cdef cnp.ndarray table_arr = np.zeros((na, nb), dtype=np.int64)
    cdef long long[:, ::1] table = table_arr
    cdef Py_ssize_t i, n = a.shape[0]
    if b.shape[0] != n:
        raise ValueError("label arrays differ in length")
    for i in range(n):
        if a[i] < 0 or a[i] >= na or b[i] < 0 or b[i] >= nb:
            raise ValueError("label out of range")
    with nogil:
        for i in range(n):
            table[a[i], b[i]] += 1
    return table_arr
