"""Hot loops with a numba path and a pure-numpy path.

The numba path is used when numba imports and ``DIRAC_BELTRAMI_NUMBA`` is not
``"0"``. Both paths compute the same thing; ``benchmarks/bench_kernels.py``
compares them.
"""
import os

import numpy as np

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def numba_enabled():
    return HAVE_NUMBA and os.environ.get("DIRAC_BELTRAMI_NUMBA", "1") != "0"


# ---------------------------------------------------------------- numpy path

def pointwise_matvec_numpy(mats, vecs):
    """out[p] = mats[p] @ vecs[p] for flattened nodes p."""
    return np.einsum("pij,pj->pi", mats, vecs)


def symbol_apply_numpy(fhat, xi, blocks):
    """out[p] = sum_k xi[k, p] * blocks[k] @ fhat[p].

    ``fhat`` is (P, B) complex, ``xi`` is (n, P) real, ``blocks`` is (n, B, B).
    """
    out = np.zeros_like(fhat)
    for k in range(blocks.shape[0]):
        out += xi[k][:, None] * (fhat @ blocks[k].T)
    return out


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _pointwise_matvec_nb(mats, vecs, out):
        P, B, _ = mats.shape
        for p in range(P):
            for i in range(B):
                acc = 0.0
                for j in range(B):
                    acc += mats[p, i, j] * vecs[p, j]
                out[p, i] = acc

    @numba.njit(cache=True)
    def _symbol_apply_nb(fhat, xi, cols, vals, out):
        n, B, R = cols.shape
        P = fhat.shape[0]
        for p in range(P):
            for i in range(B):
                acc = 0.0j
                for k in range(n):
                    x = xi[k, p]
                    if x == 0.0:
                        continue
                    s = 0.0j
                    for r in range(R):
                        s += vals[k, i, r] * fhat[p, cols[k, i, r]]
                    acc += x * s
                out[p, i] = acc


def _compress_rows(blocks):
    """Row-compressed (cols, vals) padded to the widest row; padding has val 0."""
    n, B, _ = blocks.shape
    R = max(1, int((blocks != 0).sum(axis=2).max()))
    cols = np.zeros((n, B, R), np.int64)
    vals = np.zeros((n, B, R))
    for k in range(n):
        for i in range(B):
            nz = np.flatnonzero(blocks[k, i])
            cols[k, i, :len(nz)] = nz
            vals[k, i, :len(nz)] = blocks[k, i, nz]
    return cols, vals


def pointwise_matvec(mats, vecs):
    if numba_enabled() and mats.dtype == np.float64 and vecs.dtype == np.float64:
        out = np.empty(vecs.shape, dtype=np.float64)
        _pointwise_matvec_nb(np.ascontiguousarray(mats), np.ascontiguousarray(vecs), out)
        return out
    return pointwise_matvec_numpy(mats, vecs)


def symbol_apply(fhat, xi, blocks):
    if numba_enabled():
        fhat = np.ascontiguousarray(fhat, dtype=np.complex128)
        out = np.empty_like(fhat)
        cols, vals = _compress_rows(np.asarray(blocks, dtype=np.float64))
        _symbol_apply_nb(fhat, np.ascontiguousarray(xi, dtype=np.float64), cols, vals, out)
        return out
    return symbol_apply_numpy(fhat, xi, blocks)
