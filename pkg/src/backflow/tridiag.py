"""Batched tridiagonal solves for the implicit diffusion stages.

Both solvers advance one tridiagonal system per grid column each step.  The
columns are independent, so they are solved as a batch; the Thomas recurrence
runs in compiled code and is bit-deterministic regardless of batch order.
"""

import numpy as np
from numba import njit

from .errors import NumericalError

_PIVOT_FLOOR = 1e-300


@njit(cache=True)
def _thomas_batch(lower, diag, upper, rhs, out):
    m, n = diag.shape
    cp = np.empty(n)
    dp = np.empty(n)
    for i in range(m):
        piv = diag[i, 0]
        if abs(piv) < _PIVOT_FLOOR:
            return i
        cp[0] = upper[i, 0] / piv
        dp[0] = rhs[i, 0] / piv
        for j in range(1, n):
            piv = diag[i, j] - lower[i, j] * cp[j - 1]
            if abs(piv) < _PIVOT_FLOOR:
                return i
            cp[j] = upper[i, j] / piv
            dp[j] = (rhs[i, j] - lower[i, j] * dp[j - 1]) / piv
        out[i, n - 1] = dp[n - 1]
        for j in range(n - 2, -1, -1):
            out[i, j] = dp[j] - cp[j] * out[i, j + 1]
    return -1


def solve_batch(lower, diag, upper, rhs):
    """Solve ``m`` independent tridiagonal systems of size ``n``.

    All arguments have shape ``(m, n)``; ``lower[:, 0]`` and ``upper[:, -1]``
    are ignored.  Returns the solutions with the same shape.
    """
    lower = np.ascontiguousarray(lower, dtype=np.float64)
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    upper = np.ascontiguousarray(upper, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    out = np.empty_like(diag)
    bad = _thomas_batch(lower, diag, upper, rhs, out)
    if bad >= 0:
        raise NumericalError(f"tridiagonal solve broke down in column {bad}")
    return out
