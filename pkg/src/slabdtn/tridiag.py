"""Batched Thomas algorithm.

Every vertical column problem in this package is a symmetric tridiagonal
M-matrix, one per lateral Fourier/sine mode. The batch lives on the trailing
axes so a whole stack of modes is eliminated with a single loop over levels.
"""

from __future__ import annotations

import numpy as np


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve ``T x = rhs`` for a batch of tridiagonal systems.

    Parameters
    ----------
    lower, upper : array, shape (K-1, ...)
        Sub- and super-diagonals; broadcast against the batch axes of ``rhs``.
    diag : array, shape (K, ...)
        Main diagonal.
    rhs : array, shape (K, ...)
        Right-hand sides (real or complex).

    No pivoting is done, so the systems must be diagonally dominant or
    otherwise safe for plain elimination.
    """
    diag = np.asarray(diag)
    rhs = np.asarray(rhs)
    K = rhs.shape[0]
    if diag.shape[0] != K:
        raise ValueError("diag and rhs disagree on the number of levels")
    if K == 1:
        return rhs / diag
    lower = np.asarray(lower)
    upper = np.asarray(upper)
    if lower.shape[0] != K - 1 or upper.shape[0] != K - 1:
        raise ValueError("off-diagonals must have K-1 entries")

    batch = np.broadcast_shapes(diag.shape[1:], rhs.shape[1:],
                                lower.shape[1:], upper.shape[1:])
    dtype = np.result_type(diag, rhs, lower, upper)
    cp = np.empty((K - 1,) + batch, dtype=dtype)
    dp = np.empty((K,) + batch, dtype=dtype)

    denom = np.broadcast_to(diag[0], batch)
    cp[0] = upper[0] / denom
    dp[0] = rhs[0] / denom
    for j in range(1, K):
        denom = diag[j] - lower[j - 1] * cp[j - 1]
        if j < K - 1:
            cp[j] = upper[j] / denom
        dp[j] = (rhs[j] - lower[j - 1] * dp[j - 1]) / denom

    x = dp
    for j in range(K - 2, -1, -1):
        x[j] = dp[j] - cp[j] * x[j + 1]
    return x
