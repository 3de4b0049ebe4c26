# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled support-table kernels; same contract as ``_kernels_py``."""

import numpy as np


def masked_weight_sum(const unsigned long long[:, ::1] bits, const long long[::1] weights, events):
    cdef Py_ssize_t n_rows = bits.shape[0]
    cdef Py_ssize_t k = len(events)
    cdef Py_ssize_t i, j
    cdef long long total = 0
    cdef Py_ssize_t[::1] word = np.empty(k, dtype=np.intp)
    cdef unsigned long long[::1] mask = np.empty(k, dtype=np.uint64)
    cdef long long e
    for j in range(k):
        e = events[j]
        word[j] = e >> 6
        mask[j] = (<unsigned long long>1) << (e & 63)
    for i in range(n_rows):
        for j in range(k):
            if not (bits[i, word[j]] & mask[j]):
                break
        else:
            total += weights[i]
    return int(total)


def rows_with_event(const unsigned long long[:, ::1] bits, long long event):
    cdef Py_ssize_t n_rows = bits.shape[0]
    cdef Py_ssize_t i, n = 0
    cdef Py_ssize_t word = event >> 6
    cdef unsigned long long mask = (<unsigned long long>1) << (event & 63)
    out = np.empty(n_rows, dtype=np.intp)
    cdef Py_ssize_t[::1] view = out
    for i in range(n_rows):
        if bits[i, word] & mask:
            view[n] = i
            n += 1
    return out[:n].tolist()
