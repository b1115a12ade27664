# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-window kernels: time-domain feature block and Burg recursion.

Semantics match emgauth._kernels._pykernels exactly; see that module for the
reference definitions.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def td_block(object windows, double threshold, bint use_rms):
    arr = np.ascontiguousarray(windows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 3:
        raise ValueError("windows must be 2-D with at least 3 samples per window")
    cdef const double[:, ::1] wv = arr
    cdef Py_ssize_t n_win = wv.shape[0]
    cdef Py_ssize_t n = wv.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n_win, 4), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j
    cdef double amp, wl, d, cur, nxt, prv
    cdef long zc, ssc

    with nogil:
        for i in range(n_win):
            amp = 0.0
            wl = 0.0
            zc = 0
            ssc = 0
            for j in range(n - 1):
                cur = wv[i, j]
                nxt = wv[i, j + 1]
                d = nxt - cur
                wl += fabs(d)
                if cur * nxt < 0.0 and fabs(d) >= threshold:
                    zc += 1
            for j in range(1, n - 1):
                prv = wv[i, j - 1]
                cur = wv[i, j]
                nxt = wv[i, j + 1]
                if (cur - prv) * (cur - nxt) >= threshold:
                    ssc += 1
            if use_rms:
                for j in range(n):
                    amp += wv[i, j] * wv[i, j]
                amp = sqrt(amp / n)
            else:
                for j in range(n):
                    amp += fabs(wv[i, j])
                amp = amp / n
            ov[i, 0] = amp
            ov[i, 1] = zc
            ov[i, 2] = ssc
            ov[i, 3] = wl
    return out


def burg_block(object windows, int order):
    arr = np.ascontiguousarray(windows, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("windows must be 2-D")
    cdef const double[:, ::1] wv = arr
    cdef Py_ssize_t n_win = wv.shape[0]
    cdef Py_ssize_t n = wv.shape[1]
    if order < 1:
        raise ValueError("order must be >= 1")
    if n <= 2 * order:
        raise ValueError(f"window of {n} samples too short for order {order}")

    cdef cnp.ndarray[cnp.float64_t, ndim=2] coeffs = np.zeros(
        (n_win, order), dtype=np.float64
    )
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] degenerate = np.zeros(n_win, dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] f = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.empty(order + 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] prev = np.empty(order + 1, dtype=np.float64)

    cdef double[:, ::1] cv = coeffs
    cdef cnp.uint8_t[::1] gv = degenerate
    cdef double[::1] fv = f
    cdef double[::1] bv = b
    cdef double[::1] av = a
    cdef double[::1] pv = prev
    cdef Py_ssize_t i, j, m
    cdef double lo, hi, num, den, k, fo, bo

    with nogil:
        for i in range(n_win):
            lo = wv[i, 0]
            hi = wv[i, 0]
            for j in range(n):
                fv[j] = wv[i, j]
                bv[j] = wv[i, j]
                if wv[i, j] < lo:
                    lo = wv[i, j]
                if wv[i, j] > hi:
                    hi = wv[i, j]
            if hi - lo <= 0.0:
                gv[i] = 1
                continue
            for j in range(order + 1):
                av[j] = 0.0
            av[0] = 1.0
            for m in range(1, order + 1):
                num = 0.0
                den = 0.0
                for j in range(m, n):
                    num += fv[j] * bv[j - 1]
                    den += fv[j] * fv[j] + bv[j - 1] * bv[j - 1]
                if den > 0.0:
                    k = -2.0 * num / den
                else:
                    k = 0.0
                for j in range(m + 1):
                    pv[j] = av[j]
                for j in range(1, m + 1):
                    av[j] = pv[j] + k * pv[m - j]
                for j in range(n - 1, m - 1, -1):
                    fo = fv[j]
                    bo = bv[j - 1]
                    fv[j] = fo + k * bo
                    bv[j] = bo + k * fo
            for j in range(order):
                cv[i, j] = -av[j + 1]
    return coeffs, degenerate.astype(np.bool_)
