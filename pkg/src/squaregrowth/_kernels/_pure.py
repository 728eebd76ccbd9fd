"""Reference implementations of the hot loops.

Each function mirrors the compiled version in ``_core.pyx`` operation for
operation, so both backends produce bitwise-identical floats on IEEE doubles.
"""

import numpy as np


def replicator_run(payoff_x, payoff_y, x0, y0, noise, dt):
    """Euler-integrate two co-evolving replicator players.

    ``noise`` has shape (steps, k); row t is added to both players' fitness
    vectors at step t. Returns trajectories of shape (steps + 1, k).
    """
    a = np.ascontiguousarray(payoff_x, dtype=np.float64).tolist()
    b = np.ascontiguousarray(payoff_y, dtype=np.float64).tolist()
    nz = np.ascontiguousarray(noise, dtype=np.float64)
    steps, k = nz.shape
    x = [float(v) for v in x0]
    y = [float(v) for v in y0]
    tx = np.empty((steps + 1, k))
    ty = np.empty((steps + 1, k))
    tx[0] = x
    ty[0] = y
    noise_rows = nz.tolist()
    for t in range(steps):
        eps = noise_rows[t]
        fx = [0.0] * k
        fy = [0.0] * k
        for i in range(k):
            sx = 0.0
            sy = 0.0
            ai = a[i]
            bi = b[i]
            for j in range(k):
                sx = sx + ai[j] * y[j]
                sy = sy + bi[j] * x[j]
            fx[i] = sx + eps[i]
            fy[i] = sy + eps[i]
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
        tx[t + 1] = x
        ty[t + 1] = y
    return tx, ty


def cell_ranks(counts):
    """Dense 1-based ranks per row, larger counts first, ties by column order.

    Returns ``(ranks, tied)`` where ``tied[r]`` is True when row r has at
    least two equal counts.
    """
    c = np.ascontiguousarray(counts, dtype=np.int64)
    n, m = c.shape
    ranks = np.empty((n, m), dtype=np.int32)
    tied = np.zeros(n, dtype=bool)
    rows = c.tolist()
    for r in range(n):
        row = rows[r]
        for f in range(m):
            cf = row[f]
            rank = 1
            for g in range(m):
                cg = row[g]
                if cg > cf:
                    rank += 1
                elif cg == cf and g != f:
                    tied[r] = True
                    if g < f:
                        rank += 1
            ranks[r, f] = rank
    return ranks, tied


def coverage_scan(ranks, cell_level, n_levels):
    """Accumulate (factor, rank) coverage as windows grow.

    ``cell_level[c]`` is the first level whose window contains cell c (values
    outside ``[0, n_levels)`` are skipped). Returns ``coverage`` of shape
    (L, m, m) with ``coverage[l, f, r - 1]`` set when factor f holds rank r
    in some cell of window l, plus per-level min and max rank per factor
    (``m + 1`` and ``0`` where the factor never appears).
    """
    rk = np.ascontiguousarray(ranks, dtype=np.int32)
    lv = np.ascontiguousarray(cell_level, dtype=np.int64)
    n, m = rk.shape
    cov = np.zeros((n_levels, m, m), dtype=bool)
    rmin = np.full((n_levels, m), m + 1, dtype=np.int32)
    rmax = np.zeros((n_levels, m), dtype=np.int32)
    if n_levels == 0:
        return cov, rmin, rmax
    # per-level increments, then a running OR / min / max
    for c in range(n):
        level = int(lv[c])
        if level < 0 or level >= n_levels:
            continue
        for f in range(m):
            r = int(rk[c, f])
            cov[level, f, r - 1] = True
            if r < rmin[level, f]:
                rmin[level, f] = r
            if r > rmax[level, f]:
                rmax[level, f] = r
    for level in range(1, n_levels):
        cov[level] |= cov[level - 1]
        np.minimum(rmin[level], rmin[level - 1], out=rmin[level])
        np.maximum(rmax[level], rmax[level - 1], out=rmax[level])
    return cov, rmin, rmax
