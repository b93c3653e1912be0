"""NumPy fallback for the compiled integration kernels (same signatures)."""

import numpy as np

OVERFLOW = 1e250


def rk4_matrix(g_half, h, y0, dy0):
    g_half = np.asarray(g_half, dtype=float)
    steps = (g_half.shape[0] - 1) // 2
    n = g_half.shape[1]
    y = np.empty((steps + 1, n, n))
    dy = np.empty((steps + 1, n, n))
    cy = np.array(y0, dtype=float)
    cz = np.array(dy0, dtype=float)
    y[0], dy[0] = cy, cz
    hh = 0.5 * h
    for s in range(steps):
        g0, gm, g1 = g_half[2 * s], g_half[2 * s + 1], g_half[2 * s + 2]
        k1y, k1z = cz, g0 @ cy
        k2y = cz + hh * k1z
        k2z = gm @ (cy + hh * k1y)
        k3y = cz + hh * k2z
        k3z = gm @ (cy + hh * k2y)
        k4y = cz + h * k3z
        k4z = g1 @ (cy + h * k3y)
        cy = cy + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        cz = cz + h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        y[s + 1], dy[s + 1] = cy, cz
        if np.abs(cy).max() > OVERFLOW:
            raise OverflowError("solution norm exceeded the overflow guard")
    return y, dy


def numerov_matrix(g, ainv, h, y0, y1):
    g = np.asarray(g, dtype=float)
    m = g.shape[0]
    c = h * h / 12.0
    y = np.empty_like(g)
    y[0], y[1] = y0, y1
    for s in range(1, m - 1):
        rhs = 2.0 * (y[s] + 5.0 * c * (g[s] @ y[s])) - (y[s - 1] - c * (g[s - 1] @ y[s - 1]))
        y[s + 1] = ainv[s + 1] @ rhs
        if np.abs(y[s + 1]).max() > OVERFLOW:
            raise OverflowError("solution norm exceeded the overflow guard")
    return y
