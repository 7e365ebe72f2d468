"""Pure-numpy reference implementations of the hot kernels."""

from __future__ import annotations

import numpy as np


def occupation_products(vs: np.ndarray, occs: np.ndarray) -> np.ndarray:
    """prod_j vs[s, j] ** occs[d, j] for every sample s and occupation row d.

    vs: complex (n_samples, K); occs: integer (D, K).
    Returns complex (n_samples, D). Callers chunk over samples when n * D is
    large; this routine materializes the full output.
    """
    vs = np.ascontiguousarray(vs, dtype=np.complex128)
    occs = np.asarray(occs)
    n, K = vs.shape
    out = np.ones((n, occs.shape[0]), dtype=np.complex128)
    for j in range(K):
        mo = int(occs[:, j].max()) if occs.size else 0
        pows = np.empty((n, mo + 1), dtype=np.complex128)
        pows[:, 0] = 1.0
        for p in range(1, mo + 1):
            np.multiply(pows[:, p - 1], vs[:, j], out=pows[:, p])
        out *= pows[:, occs[:, j]]
    return out


def two_body_coo(occs: np.ndarray, table: np.ndarray, strides: np.ndarray,
                 W: np.ndarray):
    """COO triplets of (1/2) sum_{ijkl} W[i,j,k,l] a_i+ a_j+ a_l a_k.

    occs: (dim, K) occupation numbers of the basis states; table: radix lookup
    with table[occ . strides] = state index; W: (K, K, K, K) real tensor.
    Returns (rows, cols, vals) with duplicate entries left for the sparse
    constructor to sum. The operator conserves total particle number, so every
    produced row index is valid.
    """
    occs = np.asarray(occs, dtype=np.int64)
    dim, K = occs.shape
    keys = occs @ strides
    cols_all = np.arange(dim, dtype=np.int64)
    rows_out, cols_out, vals_out = [], [], []
    for k in range(K):
        n_k = occs[:, k]
        for l in range(K):
            n_l = occs[:, l] - (1 if l == k else 0)
            valid_kl = (n_k >= 1) & (n_l >= 1)
            if not valid_kl.any():
                continue
            amp_kl = np.where(valid_kl,
                              np.sqrt(np.clip(n_k * n_l, 0, None).astype(float)),
                              0.0)
            occ2_base = keys - strides[k] - strides[l]
            for j in range(K):
                m_j = occs[:, j] - (1 if j == k else 0) - (1 if j == l else 0)
                for i in range(K):
                    w = W[i, j, k, l]
                    if w == 0.0:
                        continue
                    m_i = occs[:, i] - (1 if i == k else 0) - (1 if i == l else 0) \
                        + (1 if i == j else 0)
                    amp = amp_kl * np.sqrt(
                        np.clip((m_j + 1) * (m_i + 1), 0, None))
                    sel = valid_kl
                    rows = table[occ2_base[sel] + strides[j] + strides[i]]
                    rows_out.append(rows)
                    cols_out.append(cols_all[sel])
                    vals_out.append(0.5 * w * amp[sel])
    if not rows_out:
        empty = np.empty(0)
        return empty.astype(np.int64), empty.astype(np.int64), empty
    return (np.concatenate(rows_out), np.concatenate(cols_out),
            np.concatenate(vals_out))
