# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


def hungarian_square(cost):
    cdef double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(n + 1)
    cdef double[::1] minv = np.empty(n + 1)
    cdef Py_ssize_t[::1] p = np.zeros(n + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(n + 1, dtype=np.intp)
    cdef char[::1] used = np.zeros(n + 1, dtype=np.int8)
    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double delta, cur

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = INFINITY
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = c[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] r2c = out
    for j in range(1, n + 1):
        r2c[p[j] - 1] = j - 1
    return out


def pose_cost_matrix(pred_xy, pred_vis, det_xy, det_vis, int min_shared=3):
    cdef double[:, :, ::1] a = np.ascontiguousarray(pred_xy, dtype=np.float64).reshape(-1, 17, 2)
    cdef double[:, :, ::1] b = np.ascontiguousarray(det_xy, dtype=np.float64).reshape(-1, 17, 2)
    cdef cnp.uint8_t[:, ::1] av = np.ascontiguousarray(pred_vis, dtype=np.uint8).reshape(-1, 17)
    cdef cnp.uint8_t[:, ::1] bv = np.ascontiguousarray(det_vis, dtype=np.uint8).reshape(-1, 17)
    cdef Py_ssize_t n_p = a.shape[0], n_d = b.shape[0], i, j, k
    out = np.empty((n_p, n_d), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double total, du, dv
    cdef int count
    for i in range(n_p):
        for j in range(n_d):
            total = 0.0
            count = 0
            for k in range(17):
                if av[i, k] and bv[j, k]:
                    du = a[i, k, 0] - b[j, k, 0]
                    dv = a[i, k, 1] - b[j, k, 1]
                    total += sqrt(du * du + dv * dv)
                    count += 1
            if count >= min_shared:
                o[i, j] = total / count
            else:
                o[i, j] = INFINITY
    return out
