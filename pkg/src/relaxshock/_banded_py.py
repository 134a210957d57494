"""Pure-Python banded LU kernels (fallback for the compiled ``_banded_ext``).

Storage follows the LAPACK ``gbtrf`` convention: for an ``n x n`` matrix with
``kl`` sub- and ``ku`` super-diagonals, ``ab`` has ``2*kl + ku + 1`` rows and
``A[i, j]`` lives at ``ab[kl + ku + i - j, j]``.  The top ``kl`` rows hold the
fill-in created by row pivoting.
"""

import numpy as np


def band_lu_factor(ab, kl, ku, tiny):
    """Factor in place with partial pivoting.

    Returns ``(ipiv, bad)`` where ``bad`` is the first column whose pivot fell
    below ``tiny`` (``-1`` when the factorization succeeded).
    """
    n = ab.shape[1]
    kv = kl + ku
    ipiv = np.zeros(n, dtype=np.int64)
    ju = 0
    for j in range(n):
        km = min(kl, n - 1 - j)
        col = ab[kv:kv + km + 1, j]
        p = int(np.argmax(np.abs(col)))
        ipiv[j] = j + p
        if abs(col[p]) <= tiny:
            return ipiv, j
        ju = max(ju, min(j + ku + p, n - 1))
        if p != 0:
            # swap rows j and j+p over columns j..ju
            cols = np.arange(j, ju + 1)
            r1 = kv + j - cols
            r2 = kv + j + p - cols
            tmp = ab[r1, cols].copy()
            ab[r1, cols] = ab[r2, cols]
            ab[r2, cols] = tmp
        if km > 0:
            ab[kv + 1:kv + km + 1, j] /= ab[kv, j]
            if ju > j:
                lcol = ab[kv + 1:kv + km + 1, j]
                for c in range(j + 1, ju + 1):
                    urow = ab[kv + j - c, c]
                    if urow != 0.0:
                        off = kv + j - c
                        ab[off + 1:off + km + 1, c] -= lcol * urow
    return ipiv, -1


def band_lu_solve(ab, kl, ku, ipiv, b):
    """Solve with a factorization from :func:`band_lu_factor`; ``b`` is 2-D."""
    n = ab.shape[1]
    kv = kl + ku
    x = b.copy()
    for j in range(n):
        km = min(kl, n - 1 - j)
        p = ipiv[j]
        if p != j:
            tmp = x[j].copy()
            x[j] = x[p]
            x[p] = tmp
        if km > 0:
            x[j + 1:j + km + 1] -= np.outer(ab[kv + 1:kv + km + 1, j], x[j])
    for j in range(n - 1, -1, -1):
        x[j] /= ab[kv, j]
        lo = max(0, j - kv)
        if lo < j:
            x[lo:j] -= np.outer(ab[kv - (j - lo):kv, j], x[j])
    return x
