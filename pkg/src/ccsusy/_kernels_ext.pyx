# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Fixed-step integrators for y'' = g(r) y with small real N x N matrices."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

DEF OVERFLOW = 1e250


cdef inline void matmul(double[:, ::1] a, double[:, ::1] b, double[:, ::1] out, int n) noexcept nogil:
    cdef int i, j, l
    cdef double acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for l in range(n):
                acc = acc + a[i, l] * b[l, j]
            out[i, j] = acc


cdef inline void gmul(double[:, :, ::1] g, int idx, double[:, ::1] b, double[:, ::1] out, int n) noexcept nogil:
    cdef int i, j, l
    cdef double acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for l in range(n):
                acc = acc + g[idx, i, l] * b[l, j]
            out[i, j] = acc


def rk4_matrix(double[:, :, ::1] g_half, double h, y0, dy0):
    """Classical RK4 on a grid whose potential samples are spaced h/2.

    Returns (y, dy) at the n + 1 full-step points, or raises OverflowError.
    """
    cdef int m2 = g_half.shape[0]
    cdef int n = g_half.shape[1]
    cdef int steps = (m2 - 1) // 2
    y_arr = np.empty((steps + 1, n, n))
    dy_arr = np.empty((steps + 1, n, n))
    cdef double[:, :, ::1] y = y_arr
    cdef double[:, :, ::1] dy = dy_arr
    cdef double[:, ::1] cy = np.ascontiguousarray(y0, dtype=np.float64).copy()
    cdef double[:, ::1] cz = np.ascontiguousarray(dy0, dtype=np.float64).copy()
    cdef double[:, ::1] k1z = np.empty((n, n))
    cdef double[:, ::1] k2z = np.empty((n, n))
    cdef double[:, ::1] k3z = np.empty((n, n))
    cdef double[:, ::1] k4z = np.empty((n, n))
    cdef double[:, ::1] tmp = np.empty((n, n))
    cdef int s, i, j, base
    cdef double hh = 0.5 * h, h6 = h / 6.0, big = 0.0
    with nogil:
        for i in range(n):
            for j in range(n):
                y[0, i, j] = cy[i, j]
                dy[0, i, j] = cz[i, j]
        for s in range(steps):
            base = 2 * s
            # k1y = z, k1z = g0 y
            gmul(g_half, base, cy, k1z, n)
            # k2y = z + h/2 k1z, k2z = gm (y + h/2 k1y)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = cy[i, j] + hh * cz[i, j]
            gmul(g_half, base + 1, tmp, k2z, n)
            # k3y = z + h/2 k2z, k3z = gm (y + h/2 k2y)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = cy[i, j] + hh * (cz[i, j] + hh * k1z[i, j])
            gmul(g_half, base + 1, tmp, k3z, n)
            # k4y = z + h k3z, k4z = g1 (y + h k3y)
            for i in range(n):
                for j in range(n):
                    tmp[i, j] = cy[i, j] + h * (cz[i, j] + hh * k2z[i, j])
            gmul(g_half, base + 2, tmp, k4z, n)
            big = 0.0
            for i in range(n):
                for j in range(n):
                    cy[i, j] = cy[i, j] + h6 * (
                        cz[i, j] + 2.0 * (cz[i, j] + hh * k1z[i, j])
                        + 2.0 * (cz[i, j] + hh * k2z[i, j]) + (cz[i, j] + h * k3z[i, j])
                    )
                    cz[i, j] = cz[i, j] + h6 * (k1z[i, j] + 2.0 * k2z[i, j] + 2.0 * k3z[i, j] + k4z[i, j])
                    y[s + 1, i, j] = cy[i, j]
                    dy[s + 1, i, j] = cz[i, j]
                    if fabs(cy[i, j]) > big:
                        big = fabs(cy[i, j])
            if big > OVERFLOW:
                break
    if big > OVERFLOW:
        raise OverflowError("solution norm exceeded the overflow guard")
    return y_arr, dy_arr


def numerov_matrix(double[:, :, ::1] g, double[:, :, ::1] ainv, double h, y0, y1):
    """Matrix Numerov recurrence given ainv[i] = (I - h^2/12 g[i])^-1."""
    cdef int m = g.shape[0]
    cdef int n = g.shape[1]
    y_arr = np.empty((m, n, n))
    cdef double[:, :, ::1] y = y_arr
    cdef double[:, ::1] rhs = np.empty((n, n))
    cdef double[:, ::1] t0 = np.empty((n, n))
    cdef double[:, ::1] t1 = np.empty((n, n))
    cdef double[:, ::1] prev = np.ascontiguousarray(y0, dtype=np.float64).copy()
    cdef double[:, ::1] cur = np.ascontiguousarray(y1, dtype=np.float64).copy()
    cdef double c = h * h / 12.0, big = 0.0
    cdef int s, i, j
    with nogil:
        for i in range(n):
            for j in range(n):
                y[0, i, j] = prev[i, j]
                y[1, i, j] = cur[i, j]
        for s in range(1, m - 1):
            gmul(g, s, cur, t0, n)
            gmul(g, s - 1, prev, t1, n)
            for i in range(n):
                for j in range(n):
                    rhs[i, j] = 2.0 * (cur[i, j] + 5.0 * c * t0[i, j]) - (prev[i, j] - c * t1[i, j])
            big = 0.0
            for i in range(n):
                for j in range(n):
                    prev[i, j] = cur[i, j]
            gmul(ainv, s + 1, rhs, cur, n)
            for i in range(n):
                for j in range(n):
                    y[s + 1, i, j] = cur[i, j]
                    if fabs(cur[i, j]) > big:
                        big = fabs(cur[i, j])
            if big > OVERFLOW:
                break
    if big > OVERFLOW:
        raise OverflowError("solution norm exceeded the overflow guard")
    return y_arr
