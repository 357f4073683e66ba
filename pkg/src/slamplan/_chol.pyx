# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for dense lower-triangular Cholesky factors.

Same call signatures as the pure-python fallback in ``_chol_py``.
"""

from libc.math cimport sqrt


def chol_update(double[:, ::1] chol, double[::1] x):
    """In-place rank-1 update of a lower Cholesky factor: C C^T += x x^T.

    ``x`` is used as scratch and destroyed.
    """
    cdef Py_ssize_t n = chol.shape[0]
    cdef Py_ssize_t k, i
    cdef double d, r, c, s
    for k in range(n):
        d = chol[k, k]
        r = sqrt(d * d + x[k] * x[k])
        c = r / d
        s = x[k] / d
        chol[k, k] = r
        for i in range(k + 1, n):
            chol[i, k] = (chol[i, k] + s * x[i]) / c
            x[i] = c * x[i] - s * chol[i, k]


def solve_lower(double[:, ::1] chol, double[::1] b, double[::1] out):
    """Forward substitution: solve C y = b for lower-triangular C."""
    cdef Py_ssize_t n = chol.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = b[i]
        for j in range(i):
            acc -= chol[i, j] * out[j]
        out[i] = acc / chol[i, i]
