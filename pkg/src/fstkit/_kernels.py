"""Jitted fast path for the synthesis objective.

The pattern search evaluates the objective on the order of a million
times per experiment; this fused single-pass kernel replaces the numpy
reference composition (partition, estimate, fluctuation) inside that loop.
The reference implementation in fst_optimizer.objective stays canonical;
the two are equality-tested to 1e-14.
"""
from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["objective_eval"]


@njit(cache=True)
def objective_eval(pts, pt_cells, cxn, cyn, pmf, pmaps, mu, cap, w_m):
    """Total objective for one candidate test set.

    pts: (n, 2) normalized point coordinates; pt_cells: (n,) containing
    cell per point; cxn/cyn: (C,) normalized cell centers; pmaps: (V, C)
    vertex crash maps with oracle rates mu: (V,); cap: similarity cap;
    w_m: confidence weight (inf selects the pure worst-gap objective).
    Returns (total_j, worst_gap, penalty).
    """
    n = pts.shape[0]
    n_cells = cxn.shape[0]
    n_vert = pmaps.shape[0]
    w = np.zeros(n)
    den = np.zeros(n)
    num = np.zeros((n_vert, n))
    for c in range(n_cells):
        x = cxn[c]
        y = cyn[c]
        best = 0
        bd = (x - pts[0, 0]) ** 2 + (y - pts[0, 1]) ** 2
        for j in range(1, n):
            d = (x - pts[j, 0]) ** 2 + (y - pts[j, 1]) ** 2
            if d < bd:
                bd = d
                best = j
        p = pmf[c]
        w[best] += p
        if bd > 0.0:
            s = 1.0 / np.sqrt(bd)
            if s > cap:
                s = cap
        else:
            s = cap
        ps = p * s
        den[best] += ps
        for v in range(n_vert):
            num[v, best] += (pmaps[v, c] - pmaps[v, pt_cells[best]]) * ps
    worst = 0.0
    for v in range(n_vert):
        mu_t = 0.0
        for j in range(n):
            mu_t += pmaps[v, pt_cells[j]] * w[j]
        gap = abs(mu_t - mu[v])
        if gap > worst:
            worst = gap
    penalty = 0.0
    for j in range(n):
        if den[j] > 0.0:
            fmax = 0.0
            for v in range(n_vert):
                f = abs(num[v, j]) / den[j]
                if f > fmax:
                    fmax = f
            penalty += fmax * w[j]
    if np.isinf(w_m):
        total = worst
    else:
        total = w_m * worst + penalty
    return total, worst, penalty
