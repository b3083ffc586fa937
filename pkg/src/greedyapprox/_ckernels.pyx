# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Mirrors ``greedyapprox._pykernels`` exactly."""
from math import comb

import numpy as np

from libc.math cimport fabs, sqrt
from scipy.linalg.cython_blas cimport dgemv


def argmax_abs_correlation(const double[:, ::1] atoms, const double[::1] wr,
                           const unsigned char[::1] live):
    cdef int m = atoms.shape[0]
    cdef int n = atoms.shape[1]
    cdef Py_ssize_t i
    cdef Py_ssize_t best_i = -1
    cdef double best = -1.0
    cdef double best_c = 0.0
    cdef double a
    if m == 0:
        return -1, 0.0
    corr_arr = np.empty(m)
    cdef double[::1] corr = corr_arr
    # row-major (m, n) is column-major (n, m): corr = atoms^T-in-Fortran @ wr
    cdef char trans = b"T"
    cdef int inc = 1
    cdef double one = 1.0, zero = 0.0
    with nogil:
        dgemv(&trans, &n, &m, &one, <double*>&atoms[0, 0], &n, <double*>&wr[0], &inc,
              &zero, &corr[0], &inc)
        for i in range(m):
            if not live[i]:
                continue
            a = fabs(corr[i])
            if a > best:
                best = a
                best_c = corr[i]
                best_i = i
    return best_i, best_c


def orthogonalize(const double[:, ::1] basis, const double[::1] w, const double[::1] g):
    cdef int k = basis.shape[0]
    cdef int n = basis.shape[1]
    cdef Py_ssize_t i, j, p
    u_arr = np.array(g, dtype=np.float64, copy=True)
    coeffs_arr = np.zeros(k)
    if k == 0:
        return u_arr, coeffs_arr
    c_arr = np.zeros(k)
    wu_arr = np.empty(n)
    cdef double[::1] u = u_arr
    cdef double[::1] coeffs = coeffs_arr
    cdef double[::1] c = c_arr
    cdef double[::1] wu = wu_arr
    cdef char tr_t = b"T"
    cdef char tr_n = b"N"
    cdef int inc = 1
    cdef double one = 1.0, zero = 0.0, minus = -1.0
    with nogil:
        for p in range(2):
            for j in range(n):
                wu[j] = w[j] * u[j]
            dgemv(&tr_t, &n, &k, &one, <double*>&basis[0, 0], &n, &wu[0], &inc, &zero, &c[0], &inc)
            dgemv(&tr_n, &n, &k, &minus, <double*>&basis[0, 0], &n, &c[0], &inc, &one, &u[0], &inc)
            for i in range(k):
                coeffs[i] += c[i]
    return u_arr, coeffs_arr


def subset_sq_errors(const double[:, ::1] gram, const double[::1] b, double fnorm2,
                     int size, double pivot_tol):
    cdef int m = gram.shape[0]
    cdef Py_ssize_t total = comb(m, size)
    out_arr = np.empty(total)
    idx_arr = np.arange(size, dtype=np.intp)
    L_arr = np.zeros((size, size))
    z_arr = np.zeros(size)
    kept_arr = np.zeros(size, dtype=np.intp)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t[::1] idx = idx_arr
    cdef double[:, ::1] L = L_arr
    cdef double[::1] z = z_arr
    cdef Py_ssize_t[::1] kept = kept_arr
    cdef Py_ssize_t t, j, i, l, sj, si, nk, a, bb, pos
    cdef double s, d, energy
    if size == 0:
        out_arr[:] = fnorm2
        return out_arr
    with nogil:
        for t in range(total):
            nk = 0
            energy = 0.0
            for j in range(size):
                sj = idx[j]
                for a in range(nk):
                    i = kept[a]
                    si = idx[i]
                    s = gram[sj, si]
                    for bb in range(a):
                        l = kept[bb]
                        s -= L[j, l] * L[i, l]
                    L[j, i] = s / L[i, i]
                d = gram[sj, sj]
                for a in range(nk):
                    i = kept[a]
                    d -= L[j, i] * L[j, i]
                if d <= pivot_tol * gram[sj, sj]:
                    continue
                L[j, j] = sqrt(d)
                s = b[sj]
                for a in range(nk):
                    i = kept[a]
                    s -= L[j, i] * z[i]
                z[j] = s / L[j, j]
                energy += z[j] * z[j]
                kept[nk] = j
                nk += 1
            d = fnorm2 - energy
            out[t] = d if d > 0.0 else 0.0
            # next combination in lexicographic order
            pos = size - 1
            while pos >= 0 and idx[pos] == m - size + pos:
                pos -= 1
            if pos < 0:
                break
            idx[pos] += 1
            for j in range(pos + 1, size):
                idx[j] = idx[j - 1] + 1
    return out_arr
