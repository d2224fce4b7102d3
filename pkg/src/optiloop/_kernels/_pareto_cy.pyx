# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Pareto hot kernels.

Mirrors optiloop._kernels.pure exactly; the non-dominated sort inside the
evolutionary solver dominates suggestion runtime, which is why these loops
are compiled.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def non_dominated_sort(cnp.ndarray[cnp.float64_t, ndim=2] values):
    """Partition row indices of an (n, m) array into dominance fronts."""
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t m = values.shape[1]
    cdef double[:, ::1] v = np.ascontiguousarray(values)
    cdef int[::1] count = np.zeros(n, dtype=np.intc)
    # flattened adjacency: rows dominated by i stored in dominated[start[i]:end[i]]
    cdef int[::1] dom_count = np.zeros(n, dtype=np.intc)
    cdef Py_ssize_t i, j, k
    cdef bint i_le_j, i_lt_j, j_le_i, j_lt_i
    cdef double a, b

    dominated_lists = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            i_le_j = True
            i_lt_j = False
            j_le_i = True
            j_lt_i = False
            for k in range(m):
                a = v[i, k]
                b = v[j, k]
                if a > b:
                    i_le_j = False
                    j_lt_i = True
                elif a < b:
                    j_le_i = False
                    i_lt_j = True
            if i_le_j and i_lt_j:
                dominated_lists[i].append(j)
                count[j] += 1
            elif j_le_i and j_lt_i:
                dominated_lists[j].append(i)
                count[i] += 1

    fronts = []
    cdef int remaining = <int> n
    current = [i for i in range(n) if count[i] == 0]
    while remaining > 0:
        fronts.append(np.asarray(current, dtype=np.intp))
        remaining -= len(current)
        nxt = []
        for i in current:
            for j in dominated_lists[i]:
                count[j] -= 1
                if count[j] == 0:
                    nxt.append(j)
        nxt.sort()
        current = nxt
    return fronts


def _objective_order(values, j):
    """Sort order for objective j, ties broken by the remaining columns."""
    m = values.shape[1]
    minor = [values[:, k] for k in range(m - 1, -1, -1) if k != j]
    return np.lexsort(tuple(minor) + (values[:, j],))


def crowding_distance(cnp.ndarray[cnp.float64_t, ndim=2] values):
    """Per-row diversity score within one mutually non-dominated front."""
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t m = values.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist = np.zeros(n)
    if n < 3:
        dist[:] = np.inf
        return dist
    cdef double[:, ::1] v = np.ascontiguousarray(values)
    cdef double[::1] d = dist
    cdef Py_ssize_t i, j
    cdef double vmin, vmax, span
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order
    cdef cnp.intp_t[::1] o
    for j in range(m):
        vmin = v[0, j]
        vmax = v[0, j]
        for i in range(1, n):
            if v[i, j] < vmin:
                vmin = v[i, j]
            if v[i, j] > vmax:
                vmax = v[i, j]
        span = vmax - vmin
        if span <= 0.0:
            continue
        order = _objective_order(values, j)
        o = order
        d[o[0]] = np.inf
        d[o[n - 1]] = np.inf
        for i in range(1, n - 1):
            d[o[i]] += (v[o[i + 1], j] - v[o[i - 1], j]) / span
    return dist


def hypervolume_2d(cnp.ndarray[cnp.float64_t, ndim=2] values,
                   cnp.ndarray[cnp.float64_t, ndim=1] ref):
    """Exact bi-objective hypervolume by a sorted sweep."""
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order = np.lexsort(
        (values[:, 1], values[:, 0]))
    cdef double[:, :] v = values
    cdef cnp.intp_t[::1] o = order
    cdef double hv = 0.0
    cdef double prev_y = ref[1]
    cdef double rx = ref[0]
    cdef Py_ssize_t i, idx
    for i in range(o.shape[0]):
        idx = o[i]
        if v[idx, 1] < prev_y:
            hv += (rx - v[idx, 0]) * (prev_y - v[idx, 1])
            prev_y = v[idx, 1]
    return hv


def hypervolume_3d(cnp.ndarray[cnp.float64_t, ndim=2] values,
                   cnp.ndarray[cnp.float64_t, ndim=1] ref):
    """Exact tri-objective hypervolume by slicing along the third axis."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.ascontiguousarray(values[:, 2])
    cdef cnp.ndarray[cnp.float64_t, ndim=1] levels = np.unique(z)
    cdef double hv = 0.0
    cdef double height, level
    cdef Py_ssize_t k
    cdef cnp.ndarray[cnp.float64_t, ndim=2] active
    for k in range(levels.shape[0]):
        level = levels[k]
        height = (levels[k + 1] if k + 1 < levels.shape[0] else ref[2]) - level
        if height <= 0.0:
            continue
        active = np.ascontiguousarray(values[z <= level, :2])
        hv += hypervolume_2d(active, ref[:2]) * height
    return hv
