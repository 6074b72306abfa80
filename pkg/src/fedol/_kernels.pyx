# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the routines in ``fedol._fallback``."""

import numpy as np
from libc.math cimport log

ABSTAIN = -1


def row_entropy(probs):
    arr = np.ascontiguousarray(probs, dtype=np.float64)
    cdef double[:, ::1] p = arr.reshape(-1, arr.shape[arr.ndim - 1])
    cdef Py_ssize_t n = p.shape[0], c = p.shape[1], i, j
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] h = out
    cdef double s, v
    for i in range(n):
        s = 0.0
        for j in range(c):
            v = p[i, j]
            if v > 0.0:
                s += v * log(v)
        h[i] = -s
    return out.reshape(arr.shape[:arr.ndim - 1])


def vote_labels(probs, entropies, thresholds, confidences):
    cdef double[:, :, ::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef double[:, ::1] ent = np.ascontiguousarray(entropies, dtype=np.float64)
    cdef double[::1] thr = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef double[:, ::1] conf = np.ascontiguousarray(confidences, dtype=np.float64)
    cdef Py_ssize_t n_models = p.shape[0], n = p.shape[1], c = p.shape[2]
    cdef Py_ssize_t i, m, j, best, win
    cdef double bestv, w, g
    cdef bint admitted_any
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] labels = out
    cdef double[::1] num = np.empty(c)
    cdef double[::1] den = np.empty(c)
    for i in range(n):
        for j in range(c):
            num[j] = 0.0
            den[j] = 0.0
        admitted_any = False
        for m in range(n_models):
            if not ent[m, i] <= thr[m]:
                continue
            admitted_any = True
            win = 0
            bestv = p[m, i, 0]
            for j in range(1, c):
                if p[m, i, j] > bestv:
                    bestv = p[m, i, j]
                    win = j
            for j in range(c):
                w = conf[m, j]
                if j == win:
                    num[j] += w * 1.0
                else:
                    num[j] += w * -1.0
                den[j] += w
        if not admitted_any:
            labels[i] = ABSTAIN
            continue
        best = 0
        bestv = -2.0
        for j in range(c):
            g = num[j] / den[j] if den[j] > 0.0 else -1.0
            if g > bestv:
                bestv = g
                best = j
        labels[i] = best
    return out
