"""Pure-Python twins of the compiled kernels (same algorithms, same tie-breaking)."""

import math

import numpy as np


def _augment(cost, cur_row, u, v, path, row4col, sp_costs, sr, sc):
    nr, nc = len(cost), len(cost[0])
    for i in range(nr):
        sr[i] = False
    for j in range(nc):
        sc[j] = False
        sp_costs[j] = math.inf
    min_val = 0.0
    sink = -1
    i = cur_row
    while sink == -1:
        index = -1
        lowest = math.inf
        sr[i] = True
        row = cost[i]
        ui = u[i]
        for j in range(nc):
            if sc[j]:
                continue
            r = min_val + row[j] - ui - v[j]
            if r < sp_costs[j]:
                path[j] = i
                sp_costs[j] = r
            s = sp_costs[j]
            if s < lowest or (s == lowest and index >= 0
                              and row4col[index] != -1 and row4col[j] == -1):
                lowest = s
                index = j
        min_val = lowest
        if index < 0 or min_val == math.inf:
            return -1, min_val
        sc[index] = True
        if row4col[index] == -1:
            sink = index
        else:
            i = row4col[index]
    return sink, min_val


def linear_sum_assignment(cost):
    """Shortest-augmenting-path assignment; returns the column for each row."""
    cost = np.asarray(cost, dtype=np.float64)
    nr, nc = cost.shape
    if nr > nc:
        raise ValueError("cost matrix must have at most as many rows as columns")
    # python floats in lists are much faster than numpy scalars in these loops
    rows = cost.tolist()
    u = [0.0] * nr
    v = [0.0] * nc
    sp_costs = [math.inf] * nc
    path = [-1] * nc
    col4row = [-1] * nr
    row4col = [-1] * nc
    sr = [False] * nr
    sc = [False] * nc
    for cur_row in range(nr):
        sink, min_val = _augment(rows, cur_row, u, v, path, row4col, sp_costs, sr, sc)
        if sink < 0:
            raise ValueError("cost matrix is infeasible")
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
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break
    return np.asarray(col4row, dtype=np.intp)


def nearest_assign(pixels, centers, threshold):
    pixels = np.asarray(pixels, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    n = pixels.shape[0]
    out = np.zeros(n, dtype=np.int64)
    if centers.shape[0] == 0:
        return out
    if centers.shape[1] != pixels.shape[1]:
        raise ValueError("embedding widths differ")
    for p in range(n):
        best, best_d = -1, math.inf
        for c in range(centers.shape[0]):
            diff = pixels[p] - centers[c]
            acc = float(np.dot(diff, diff))
            if acc < best_d:
                best, best_d = c, acc
        if best >= 0 and math.sqrt(best_d) < threshold:
            out[p] = best + 1
    return out


def contingency(a, b, na, nb):
    a = np.asarray(a, dtype=np.int64).ravel()
    b = np.asarray(b, dtype=np.int64).ravel()
    if a.shape != b.shape:
        raise ValueError("label arrays differ in length")
    if a.size and (a.min() < 0 or a.max() >= na or b.min() < 0 or b.max() >= nb):
        raise ValueError("label out of range")
    table = np.zeros((na, nb), dtype=np.int64)
    for x, y in zip(a.tolist(), b.tolist()):
        table[x, y] += 1
    return table
