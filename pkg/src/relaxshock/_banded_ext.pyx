# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled banded LU kernels; same contract as ``_banded_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def band_lu_factor(double[:, ::1] ab, Py_ssize_t kl, Py_ssize_t ku, double tiny):
    cdef Py_ssize_t n = ab.shape[1]
    cdef Py_ssize_t kv = kl + ku
    cdef Py_ssize_t j, i, c, km, p, ju = 0
    cdef double best, val, tmp, piv, u
    ipiv_arr = np.zeros(n, dtype=np.int64)
    cdef long long[::1] ipiv = ipiv_arr
    for j in range(n):
        km = kl if kl < n - 1 - j else n - 1 - j
        p = 0
        best = fabs(ab[kv, j])
        for i in range(1, km + 1):
            val = fabs(ab[kv + i, j])
            if val > best:
                best = val
                p = i
        ipiv[j] = j + p
        if best <= tiny:
            return ipiv_arr, j
        if j + ku + p < n - 1:
            if j + ku + p > ju:
                ju = j + ku + p
        else:
            ju = n - 1
        if p != 0:
            for c in range(j, ju + 1):
                tmp = ab[kv + j - c, c]
                ab[kv + j - c, c] = ab[kv + j + p - c, c]
                ab[kv + j + p - c, c] = tmp
        if km > 0:
            piv = ab[kv, j]
            for i in range(1, km + 1):
                ab[kv + i, j] /= piv
            for c in range(j + 1, ju + 1):
                u = ab[kv + j - c, c]
                if u != 0.0:
                    for i in range(1, km + 1):
                        ab[kv + j - c + i, c] -= ab[kv + i, j] * u
    return ipiv_arr, -1


def band_lu_solve(double[:, ::1] ab, Py_ssize_t kl, Py_ssize_t ku,
                  long long[::1] ipiv, b):
    cdef Py_ssize_t n = ab.shape[1]
    cdef Py_ssize_t kv = kl + ku
    x_arr = np.array(b, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] x = x_arr
    cdef Py_ssize_t nr = x.shape[1]
    cdef Py_ssize_t j, i, k, km, p, lo
    cdef double tmp, xj, d
    for j in range(n):
        km = kl if kl < n - 1 - j else n - 1 - j
        p = ipiv[j]
        if p != j:
            for k in range(nr):
                tmp = x[j, k]
                x[j, k] = x[p, k]
                x[p, k] = tmp
        for i in range(1, km + 1):
            d = ab[kv + i, j]
            if d != 0.0:
                for k in range(nr):
                    x[j + i, k] -= d * x[j, k]
    for j in range(n - 1, -1, -1):
        d = ab[kv, j]
        for k in range(nr):
            x[j, k] /= d
        lo = j - kv if j - kv > 0 else 0
        for i in range(lo, j):
            d = ab[kv + i - j, j]
            if d != 0.0:
                for k in range(nr):
                    x[i, k] -= d * x[j, k]
    return x_arr
