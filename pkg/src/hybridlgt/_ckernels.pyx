# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops for local-gate application on a flat statevector.

Complex arithmetic is spelled out on interleaved (re, im) doubles so the inner
loop compiles to plain floating-point code.
"""

import numpy as np
cimport numpy as cnp

ctypedef double complex cplx


def apply_local_tables(cplx[:, ::1] data, cplx[:, ::1] mat,
                       cnp.int64_t[::1] base, cnp.int64_t[::1] off):
    cdef Py_ssize_t nb = base.shape[0]
    cdef Py_ssize_t D = off.shape[0]
    cdef Py_ssize_t K = data.shape[1]
    cdef Py_ssize_t b, i, j, k, row
    cdef double ar, ai, mr, mi, xr, xi
    cdef double[::1] buf = np.empty(2 * D, dtype=np.float64)
    cdef double *d = <double *> &data[0, 0]
    cdef double *m = <double *> &mat[0, 0]
    cdef cnp.int64_t *bp = &base[0]
    cdef cnp.int64_t *op = &off[0]
    cdef double *bf = &buf[0]
    with nogil:
        for b in range(nb):
            for k in range(K):
                for j in range(D):
                    row = 2 * ((bp[b] + op[j]) * K + k)
                    bf[2 * j] = d[row]
                    bf[2 * j + 1] = d[row + 1]
                for i in range(D):
                    ar = 0.0
                    ai = 0.0
                    for j in range(D):
                        mr = m[2 * (i * D + j)]
                        mi = m[2 * (i * D + j) + 1]
                        xr = bf[2 * j]
                        xi = bf[2 * j + 1]
                        ar = ar + mr * xr - mi * xi
                        ai = ai + mr * xi + mi * xr
                    row = 2 * ((bp[b] + op[i]) * K + k)
                    d[row] = ar
                    d[row + 1] = ai
    return np.asarray(data)


def apply_diagonal(cplx[:, ::1] data, cplx[::1] diag):
    cdef Py_ssize_t n = data.shape[0]
    cdef Py_ssize_t K = data.shape[1]
    cdef Py_ssize_t i, k
    cdef double *d = <double *> &data[0, 0]
    cdef double *g = <double *> &diag[0]
    cdef double xr, xi, gr, gi
    with nogil:
        for i in range(n):
            gr = g[2 * i]
            gi = g[2 * i + 1]
            for k in range(K):
                xr = d[2 * (i * K + k)]
                xi = d[2 * (i * K + k) + 1]
                d[2 * (i * K + k)] = gr * xr - gi * xi
                d[2 * (i * K + k) + 1] = gr * xi + gi * xr
    return np.asarray(data)
