# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the occupation-basis hot loops (see _ref.py)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def occupation_products(vs, occs):
    """Same contract as kernels._ref.occupation_products."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] v = \
        np.ascontiguousarray(vs, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] oc = \
        np.ascontiguousarray(occs, dtype=np.int64)
    cdef Py_ssize_t n = v.shape[0], K = v.shape[1], D = oc.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] out = \
        np.empty((n, D), dtype=np.complex128)
    cdef Py_ssize_t max_occ = 0, s, d, j, p
    for d in range(D):
        for j in range(K):
            if oc[d, j] > max_occ:
                max_occ = oc[d, j]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] pows = \
        np.empty((K, max_occ + 1), dtype=np.complex128)
    cdef double complex acc
    for s in range(n):
        for j in range(K):
            pows[j, 0] = 1.0
            for p in range(1, max_occ + 1):
                pows[j, p] = pows[j, p - 1] * v[s, j]
        for d in range(D):
            acc = 1.0
            for j in range(K):
                acc = acc * pows[j, oc[d, j]]
            out[s, d] = acc
    return out


def two_body_coo(occs, table, strides, W):
    """Same contract as kernels._ref.two_body_coo."""
    cdef cnp.ndarray[cnp.int64_t, ndim=2] oc = \
        np.ascontiguousarray(occs, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] tab = \
        np.ascontiguousarray(table, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] st = \
        np.ascontiguousarray(strides, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=4] w4 = \
        np.ascontiguousarray(W, dtype=np.float64)
    cdef Py_ssize_t dim = oc.shape[0], K = oc.shape[1]

    # count nonzero W entries to bound the output size
    cdef Py_ssize_t i, j, k, l, nw = 0
    for i in range(K):
        for j in range(K):
            for k in range(K):
                for l in range(K):
                    if w4[i, j, k, l] != 0.0:
                        nw += 1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rows = np.empty(dim * nw, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cols = np.empty(dim * nw, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vals = np.empty(dim * nw, dtype=np.float64)

    cdef Py_ssize_t s, out_n = 0
    cdef long long key, n_k, n_l, m_j, m_i
    cdef double amp, wv
    for s in range(dim):
        key = 0
        for j in range(K):
            key += oc[s, j] * st[j]
        for k in range(K):
            n_k = oc[s, k]
            if n_k < 1:
                continue
            for l in range(K):
                n_l = oc[s, l] - (1 if l == k else 0)
                if n_l < 1:
                    continue
                for j in range(K):
                    m_j = oc[s, j] - (1 if j == k else 0) - (1 if j == l else 0)
                    for i in range(K):
                        wv = w4[i, j, k, l]
                        if wv == 0.0:
                            continue
                        m_i = oc[s, i] - (1 if i == k else 0) \
                            - (1 if i == l else 0) + (1 if i == j else 0)
                        amp = sqrt(<double>(n_k * n_l)) \
                            * sqrt(<double>((m_j + 1) * (m_i + 1)))
                        rows[out_n] = tab[key - st[k] - st[l] + st[j] + st[i]]
                        cols[out_n] = s
                        vals[out_n] = 0.5 * wv * amp
                        out_n += 1
    return rows[:out_n], cols[:out_n], vals[:out_n]
