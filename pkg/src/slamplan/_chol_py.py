"""Pure-numpy fallback for the compiled factor kernels in ``_chol.pyx``."""

import numpy as np


def chol_update(chol, x):
    """In-place rank-1 update of a lower Cholesky factor: C C^T += x x^T.

    ``x`` is used as scratch and destroyed.
    """
    n = chol.shape[0]
    for k in range(n):
        d = chol[k, k]
        r = np.sqrt(d * d + x[k] * x[k])
        c = r / d
        s = x[k] / d
        chol[k, k] = r
        if k + 1 < n:
            col = chol[k + 1 :, k]
            col += s * x[k + 1 :]
            col /= c
            x[k + 1 :] = c * x[k + 1 :] - s * col


def solve_lower(chol, b, out):
    """Forward substitution: solve C y = b for lower-triangular C."""
    n = chol.shape[0]
    for i in range(n):
        out[i] = (b[i] - chol[i, :i] @ out[:i]) / chol[i, i]
