# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: Cox-de Boor basis rows and elementary symmetric sums.

Both routines mirror :mod:`multisel._pykernels` operation for operation so the
two backends agree to the last bit on the same inputs.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF MAX_ORDER = 16


cdef inline Py_ssize_t _find_span(const double[:] t, Py_ssize_t p,
                                  Py_ssize_t dim, double s) noexcept nogil:
    # largest i in [p, dim - 1] with t[i] <= s
    cdef Py_ssize_t lo = p, hi = dim - 1, mid
    if s >= t[dim - 1]:
        return dim - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if t[mid] <= s:
            lo = mid
        else:
            hi = mid
    if t[hi] <= s:
        return hi
    return lo


def bspline_basis(const double[:] knots, int order, const double[:] s):
    """Evaluate every basis function of a clamped knot sequence at ``s``.

    Points outside ``[knots[0], knots[-1]]`` are clamped to the boundary.
    """
    cdef Py_ssize_t p = order - 1
    cdef Py_ssize_t dim = knots.shape[0] - order
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t i, j, r, span
    cdef double x, lo, hi, saved, temp
    cdef double left[MAX_ORDER]
    cdef double right[MAX_ORDER]
    cdef double N[MAX_ORDER]
    if order < 1 or order > MAX_ORDER:
        raise ValueError(f"order must be in [1, {MAX_ORDER}]")
    if dim < order:
        raise ValueError("knot sequence too short for the requested order")
    out = np.zeros((n, dim), dtype=np.float64)
    cdef double[:, ::1] B = out
    lo = knots[0]
    hi = knots[knots.shape[0] - 1]
    with nogil:
        for i in range(n):
            x = s[i]
            if x < lo:
                x = lo
            elif x > hi:
                x = hi
            span = _find_span(knots, p, dim, x)
            N[0] = 1.0
            for j in range(1, p + 1):
                left[j] = x - knots[span + 1 - j]
                right[j] = knots[span + j] - x
                saved = 0.0
                for r in range(j):
                    temp = N[r] / (right[r + 1] + left[j - r])
                    N[r] = saved + right[r + 1] * temp
                    saved = left[j - r] * temp
                N[j] = saved
            for j in range(p + 1):
                B[i, span - p + j] = N[j]
    return out


def elementary_symmetric_rows(const double[:, :] q, int L):
    """First ``L`` elementary symmetric polynomials of each row of ``q``."""
    cdef Py_ssize_t n = q.shape[0]
    cdef Py_ssize_t m = q.shape[1]
    cdef Py_ssize_t i, j, l, top
    cdef double qj
    out = np.zeros((n, L + 1), dtype=np.float64)
    cdef double[:, ::1] E = out
    with nogil:
        for i in range(n):
            E[i, 0] = 1.0
            for j in range(m):
                qj = q[i, j]
                top = j + 1 if j + 1 < L else L
                for l in range(top, 0, -1):
                    E[i, l] = E[i, l] + qj * E[i, l - 1]
    return out[:, 1:]
