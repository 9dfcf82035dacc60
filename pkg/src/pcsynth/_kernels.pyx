# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Schur-complement assembly and min-of-quadratics.

Mirrors ``_kernels_py``; the pure-Python module is the reference.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()

TIE_TOL = 1e-12


def schur_blocks(double[:, :, :, ::1] coef, double[:, :, ::1] X,
                 double[:, :, ::1] Zinv, double[:, :, ::1] out):
    cdef Py_ssize_t nb = coef.shape[0], k = coef.shape[1], s = coef.shape[2]
    cdef Py_ssize_t b, p, q, i, j, r
    cdef double acc, v
    # per block: T = X F_q, G_q = T Zinv
    cdef double *T = <double *> malloc(s * s * sizeof(double))
    cdef double *G = <double *> malloc(k * s * s * sizeof(double))
    if T == NULL or G == NULL:
        free(T)
        free(G)
        raise MemoryError()
    try:
        for b in range(nb):
            for q in range(k):
                for i in range(s):
                    for j in range(s):
                        acc = 0.0
                        for r in range(s):
                            acc = acc + X[b, i, r] * coef[b, q, r, j]
                        T[i * s + j] = acc
                for i in range(s):
                    for j in range(s):
                        acc = 0.0
                        for r in range(s):
                            acc = acc + T[i * s + r] * Zinv[b, r, j]
                        G[(q * s + i) * s + j] = acc
            for p in range(k):
                for q in range(p, k):
                    acc = 0.0
                    for i in range(s):
                        for j in range(s):
                            v = coef[b, p, i, j]
                            if v != 0.0:
                                acc = acc + v * G[(q * s + j) * s + i]
                    out[b, p, q] = acc
            # mirror: tr(F_p X F_q Zinv) is symmetric in (p, q) for symmetric X, Zinv
            for p in range(k):
                for q in range(p):
                    out[b, p, q] = out[b, q, p]
    finally:
        free(T)
        free(G)


def min_quadratic(double[:, :, ::1] P, double[:, ::1] X, double tie_tol=TIE_TOL):
    cdef Py_ssize_t N = P.shape[0], n = P.shape[1], npts = X.shape[0]
    cdef Py_ssize_t p, s, i, j
    cdef double acc, row, best, norm2
    W_arr = np.empty(npts)
    node_arr = np.empty(npts, dtype=np.int64)
    cdef double[::1] W = W_arr
    cdef long long[::1] node = node_arr
    cdef double *vals = <double *> malloc(N * sizeof(double))
    if vals == NULL:
        raise MemoryError()
    try:
        for p in range(npts):
            best = 0.0
            for s in range(N):
                acc = 0.0
                for i in range(n):
                    row = 0.0
                    for j in range(n):
                        row = row + P[s, i, j] * X[p, j]
                    acc = acc + X[p, i] * row
                vals[s] = acc
                if s == 0 or acc < best:
                    best = acc
            W[p] = best
            # tie threshold taken on the unit direction: scale-free selection
            norm2 = 0.0
            for i in range(n):
                norm2 = norm2 + X[p, i] * X[p, i]
            for s in range(N):
                if vals[s] <= best + tie_tol * norm2:
                    node[p] = s
                    break
    finally:
        free(vals)
    return W_arr, node_arr
