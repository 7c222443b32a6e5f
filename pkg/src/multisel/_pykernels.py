"""Numpy fallback for the compiled kernels in ``_ckernels.pyx``.

The loops run over basis order and polynomial degree; observations are
vectorized. Arithmetic order matches the compiled version exactly.
"""

import numpy as np


def bspline_basis(knots, order, s):
    knots = np.asarray(knots, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    p = order - 1
    dim = knots.shape[0] - order
    if order < 1:
        raise ValueError("order must be >= 1")
    if dim < order:
        raise ValueError("knot sequence too short for the requested order")
    x = np.clip(s, knots[0], knots[-1])
    span = np.searchsorted(knots, x, side="right") - 1
    span = np.clip(span, p, dim - 1)
    n = x.shape[0]
    N = np.zeros((order, n))
    N[0] = 1.0
    left = np.zeros((order, n))
    right = np.zeros((order, n))
    for j in range(1, p + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = np.zeros(n)
        for r in range(j):
            temp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[j] = saved
    out = np.zeros((n, dim))
    rows = np.arange(n)
    for j in range(p + 1):
        out[rows, span - p + j] = N[j]
    return out


def elementary_symmetric_rows(q, L):
    q = np.asarray(q, dtype=np.float64)
    n, m = q.shape
    E = np.zeros((L + 1, n))
    E[0] = 1.0
    for j in range(m):
        qj = q[:, j]
        for l in range(min(j + 1, L), 0, -1):
            E[l] = E[l] + qj * E[l - 1]
    return np.ascontiguousarray(E[1:].T)
