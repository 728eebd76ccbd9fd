# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Keep the arithmetic order identical to ``_pure.py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def replicator_run(payoff_x, payoff_y, x0, y0, noise, double dt):
    cdef const double[:, ::1] a = np.ascontiguousarray(payoff_x, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(payoff_y, dtype=np.float64)
    cdef const double[:, ::1] nz = np.ascontiguousarray(noise, dtype=np.float64)
    cdef Py_ssize_t steps = nz.shape[0]
    cdef Py_ssize_t k = nz.shape[1]
    out_x = np.empty((steps + 1, k))
    out_y = np.empty((steps + 1, k))
    cdef double[:, ::1] tx = out_x
    cdef double[:, ::1] ty = out_y
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] y = np.array(y0, dtype=np.float64)
    cdef double[::1] fx = np.empty(k)
    cdef double[::1] fy = np.empty(k)
    cdef Py_ssize_t t, i, j
    cdef double sx, sy, mx, my, totx, toty, xi, yi
    for i in range(k):
        tx[0, i] = x[i]
        ty[0, i] = y[i]
    for t in range(steps):
        for i in range(k):
            sx = 0.0
            sy = 0.0
            for j in range(k):
                sx = sx + a[i, j] * y[j]
                sy = sy + b[i, j] * x[j]
            fx[i] = sx + nz[t, i]
            fy[i] = sy + nz[t, i]
        mx = 0.0
        my = 0.0
        for i in range(k):
            mx = mx + x[i] * fx[i]
            my = my + y[i] * fy[i]
        totx = 0.0
        toty = 0.0
        for i in range(k):
            xi = x[i] + dt * x[i] * (fx[i] - mx)
            yi = y[i] + dt * y[i] * (fy[i] - my)
            if xi < 0.0:
                xi = 0.0
            if yi < 0.0:
                yi = 0.0
            x[i] = xi
            y[i] = yi
            totx = totx + xi
            toty = toty + yi
        for i in range(k):
            x[i] = x[i] / totx
            y[i] = y[i] / toty
            tx[t + 1, i] = x[i]
            ty[t + 1, i] = y[i]
    return out_x, out_y


def cell_ranks(counts):
    cdef const cnp.int64_t[:, ::1] c = np.ascontiguousarray(counts, dtype=np.int64)
    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t m = c.shape[1]
    out_r = np.empty((n, m), dtype=np.int32)
    out_t = np.zeros(n, dtype=np.uint8)
    cdef cnp.int32_t[:, ::1] ranks = out_r
    cdef cnp.uint8_t[::1] tied = out_t
    cdef Py_ssize_t r, f, g
    cdef cnp.int64_t cf, cg
    cdef int rank
    for r in range(n):
        for f in range(m):
            cf = c[r, f]
            rank = 1
            for g in range(m):
                cg = c[r, g]
                if cg > cf:
                    rank += 1
                elif cg == cf and g != f:
                    tied[r] = 1
                    if g < f:
                        rank += 1
            ranks[r, f] = rank
    return out_r, out_t.astype(bool)


def coverage_scan(ranks, cell_level, Py_ssize_t n_levels):
    cdef const cnp.int32_t[:, ::1] rk = np.ascontiguousarray(ranks, dtype=np.int32)
    cdef const cnp.int64_t[::1] lv = np.ascontiguousarray(cell_level, dtype=np.int64)
    cdef Py_ssize_t n = rk.shape[0]
    cdef Py_ssize_t m = rk.shape[1]
    out_cov = np.zeros((n_levels, m, m), dtype=np.uint8)
    out_min = np.full((n_levels, m), m + 1, dtype=np.int32)
    out_max = np.zeros((n_levels, m), dtype=np.int32)
    if n_levels == 0:
        return out_cov.astype(bool), out_min, out_max
    cdef cnp.uint8_t[:, :, ::1] cov = out_cov
    cdef cnp.int32_t[:, ::1] rmin = out_min
    cdef cnp.int32_t[:, ::1] rmax = out_max
    cdef Py_ssize_t c, f, level, q
    cdef int r
    for c in range(n):
        level = lv[c]
        if level < 0 or level >= n_levels:
            continue
        for f in range(m):
            r = rk[c, f]
            cov[level, f, r - 1] = 1
            if r < rmin[level, f]:
                rmin[level, f] = r
            if r > rmax[level, f]:
                rmax[level, f] = r
    for level in range(1, n_levels):
        for f in range(m):
            for q in range(m):
                if cov[level - 1, f, q]:
                    cov[level, f, q] = 1
            if rmin[level - 1, f] < rmin[level, f]:
                rmin[level, f] = rmin[level - 1, f]
            if rmax[level - 1, f] > rmax[level, f]:
                rmax[level, f] = rmax[level - 1, f]
    return out_cov.astype(bool), out_min, out_max
