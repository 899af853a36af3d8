# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the photon-counting kernels. See ``_kernels_py`` for the reference."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, lgamma

cnp.import_array()


def two_mode_pnd(double a, double b, double c2, int cutoff):
    cdef int N = cutoff + 1
    cdef double c = a * b - c2
    cdef double D = 1.0 + a + b + c
    cdef double x1 = (a + c) / D
    cdef double x2 = (b + c) / D
    cdef double w = c2 / (D * D)
    cdef double lx1 = log(x1) if x1 > 0 else -1e300
    cdef double lx2 = log(x2) if x2 > 0 else -1e300
    cdef double lw = log(w) if w > 0 else -1e300
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lf = np.empty(N)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((N, N))
    cdef int n1, n2, k, kmax
    cdef double s, t
    for n1 in range(N):
        lf[n1] = lgamma(n1 + 1.0)
    for n1 in range(N):
        for n2 in range(N):
            kmax = n1 if n1 < n2 else n2
            s = 0.0
            for k in range(kmax + 1):
                t = lf[n1] - lf[k] - lf[n1 - k] + lf[n2] - lf[k] - lf[n2 - k]
                if k > 0:
                    t += k * lw
                if n1 - k > 0:
                    t += (n1 - k) * lx1
                if n2 - k > 0:
                    t += (n2 - k) * lx2
                s += exp(t)
            out[n1, n2] = s / D
    return out


cdef inline void _mixture_pmf(double[:, :] I, Py_ssize_t r, int N, double* buf, double* tmp):
    cdef Py_ssize_t nb = I.shape[1]
    cdef Py_ssize_t b
    cdef int n
    cdef double lam, p, inv = 1.0 / nb
    for n in range(N):
        buf[n] = 0.0
    for b in range(nb):
        lam = I[r, b]
        p = exp(-lam)
        tmp[0] = p
        for n in range(1, N):
            p = p * lam / n
            tmp[n] = p
        for n in range(N):
            buf[n] += tmp[n] * inv


def poisson_mixture_accumulate(I1, I2, int cutoff):
    cdef double[:, :] A = np.ascontiguousarray(I1, dtype=np.float64)
    cdef double[:, :] B = np.ascontiguousarray(I2, dtype=np.float64)
    cdef int N = cutoff + 1
    cdef Py_ssize_t R = A.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] total = np.zeros((N, N))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] total_sq = np.zeros((N, N))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = np.empty(4 * N)
    cdef double* p1 = &work[0]
    cdef double* p2 = &work[N]
    cdef double* tmp = &work[2 * N]
    cdef Py_ssize_t r
    cdef int i, j
    cdef double v
    if B.shape[0] != R:
        raise ValueError("I1 and I2 must have the same number of realizations")
    for r in range(R):
        _mixture_pmf(A, r, N, p1, tmp)
        _mixture_pmf(B, r, N, p2, tmp)
        for i in range(N):
            for j in range(N):
                v = p1[i] * p2[j]
                total[i, j] += v
                total_sq[i, j] += v * v
    return total, total_sq
