"""Scalar maximization helpers: golden-section search and grid-then-refine.

These are used for the concave inner maximizations that appear throughout
(inner Bellman step, myopic rate, guarantee constants, static rate search).
The grid front end keeps multimodal objectives (non-regular logistic demand)
from fooling the local refinement.
"""

from __future__ import annotations

import math

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi


def golden_section_max(f, lo: float, hi: float, tol: float, max_iter: int = 200):
    """Maximize a unimodal scalar function on [lo, hi].

    Returns (x, f(x)).  Endpoints are always candidates, so a maximum at the
    boundary is returned exactly rather than at the interior bracket midpoint.
    """
    if hi < lo:
        raise ValueError("empty bracket")
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    candidates = [(lo, f(lo)), (hi, f(hi)), (x1, f1), (x2, f2)]
    # smallest argmax among ties keeps results deterministic
    best = max(candidates, key=lambda t: (t[1], -t[0]))
    return best[0], best[1]


def grid_then_golden(f, lo: float, hi: float, n_grid: int, tol: float):
    """Global grid scan followed by golden-section refinement of the best cell.

    f must accept an ndarray and return an ndarray (it is also called on
    scalars during refinement).
    """
    xs = np.linspace(lo, hi, n_grid)
    ys = np.asarray(f(xs), dtype=float)
    k = int(np.argmax(ys))
    a = xs[max(k - 1, 0)]
    b = xs[min(k + 1, n_grid - 1)]
    x, fx = golden_section_max(lambda t: float(f(np.asarray([t]))[0]), a, b, tol)
    if ys[k] > fx:
        return float(xs[k]), float(ys[k])
    return float(x), float(fx)


def vector_golden_max(f, lo, hi, tol: float, max_iter: int = 200):
    """Golden-section search run in lockstep over a vector of brackets.

    f maps an ndarray of points to an ndarray of values; each component is
    assumed unimodal on its own [lo_i, hi_i].  Returns (x, fx) arrays with
    endpoints included as candidates.
    """
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if np.max(b - a) <= tol:
            break
        left = f1 >= f2
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        x1n = b - INV_PHI * (b - a)
        x2n = a + INV_PHI * (b - a)
        x_new = np.where(left, x1n, x2n)
        f_new = f(x_new)
        x1, f1, x2, f2 = (
            np.where(left, x1n, x2),
            np.where(left, f_new, f2),
            np.where(left, x1, x2n),
            np.where(left, f1, f_new),
        )
    xs = np.stack([a, b, x1, x2])
    fs = np.stack([f(a), f(b), f1, f2])
    # prefer the smallest maximizer on ties (deterministic greedy policies)
    order = np.lexsort((xs, -fs), axis=0)[0]
    idx = np.arange(a.shape[0])
    return xs[order, idx], fs[order, idx]
