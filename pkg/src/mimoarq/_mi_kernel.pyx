# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled pairwise-gap MI kernel; contract in kernels.round_gap_terms."""

from libc.math cimport exp, log

import numpy as np


def round_gap_terms(const double complex[:, :, ::1] u,
                    const double complex[:, :, ::1] w,
                    double[:, ::1] out):
    cdef Py_ssize_t nb = u.shape[0], nq = u.shape[1], nr = u.shape[2]
    cdef Py_ssize_t nd = w.shape[1]
    cdef Py_ssize_t b, q, p, d, r
    cdef double complex du
    cdef double d2, cross, mx, s, e
    cdef double ln2 = log(2.0)
    cdef double skip = -46.0  # exp() under 1e-20: below the sum's resolution
    ebuf_arr = np.empty((nd, nq))
    duv_arr = np.empty(nr, dtype=np.complex128)
    cdef double[:, ::1] ebuf = ebuf_arr
    cdef double complex[::1] duv = duv_arr
    for b in range(nb):
        for d in range(nd):
            out[b, d] = 0.0
        for q in range(nq):
            for p in range(nq):
                d2 = 0.0
                for r in range(nr):
                    du = u[b, q, r] - u[b, p, r]
                    duv[r] = du
                    d2 += du.real * du.real + du.imag * du.imag
                for d in range(nd):
                    cross = 0.0
                    for r in range(nr):
                        du = duv[r]
                        cross += (du.real * w[b, d, r].real
                                  + du.imag * w[b, d, r].imag)
                    ebuf[d, p] = -d2 - 2.0 * cross
            for d in range(nd):
                mx = ebuf[d, 0]
                for p in range(1, nq):
                    if ebuf[d, p] > mx:
                        mx = ebuf[d, p]
                s = 0.0
                for p in range(nq):
                    e = ebuf[d, p] - mx
                    if e > skip:
                        s += exp(e)
                out[b, d] += mx + log(s)
        for d in range(nd):
            out[b, d] /= nq * ln2
    return np.asarray(out)
