"""Dense reference for the Neumann solver on tiny grids.

Everything is assembled as explicit matrices on the (N^n * 2^n)-dimensional
space of grid fields: a Kronecker DFT matrix, per-mode symbols built from
``clifford_pair`` and inverted with a dense solve, and block-diagonal M.
None of the FFT or closed-form inverse code paths are used.
"""
import numpy as np

from .exterior import Multivector, clifford_pair
from .grid import MultivectorField


def dft_matrix(N, n):
    j = np.arange(N)
    F1 = np.exp(-2j * np.pi * np.outer(j, j) / N)
    F = np.ones((1, 1))
    for _ in range(n):
        F = np.kron(F, F1)
    return F


def mode_frequencies(spec):
    """Per-mode xi (Nyquist components zeroed), shape (N^n, n), in C order."""
    N = spec.N
    k = np.array([j if j < N // 2 else (0 if j == N // 2 else j - N) for j in range(N)], float)
    k *= 2 * np.pi / spec.L
    grids = np.meshgrid(*[k] * spec.dim, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def symbol_by_pairs(xi):
    """(m+(xi), m-(xi)) assembled column by column from clifford_pair."""
    n = len(xi)
    B = 1 << n
    v = Multivector.vector(xi)
    mp = np.zeros((B, B))
    mm = np.zeros((B, B))
    for j in range(B):
        e = np.zeros(B)
        e[j] = 1.0
        a, b = clifford_pair(v, Multivector(n, e))
        mp[:, j] = a.coeffs
        mm[:, j] = b.coeffs
    return mp, mm


def dense_operators(spec, dealias=False):
    """Dense (S, C, P0) on the flattened node-major, blade-minor vector space."""
    B = spec.nblades
    P = spec.N ** spec.dim
    F = np.kron(dft_matrix(spec.N, spec.dim), np.eye(B))
    Finv = np.conj(F.T) / P
    S_hat = np.zeros((P * B, P * B), complex)
    C_hat = np.zeros((P * B, P * B), complex)
    keep = np.zeros(P * B)
    trunc = spec.dealias_mask().ravel() if dealias else np.ones(P, bool)
    for p, xi in enumerate(mode_frequencies(spec)):
        if not np.any(xi):
            continue
        mp, mm = symbol_by_pairs(xi)
        sig_p, sig_m = 1j * mp, 1j * mm
        inv_m = np.linalg.solve(sig_m, np.eye(B))
        sl = slice(p * B, (p + 1) * B)
        S_hat[sl, sl] = sig_p @ inv_m
        C_hat[sl, sl] = inv_m
        keep[sl] = 1.0 if trunc[p] else 0.0
    S = (Finv @ S_hat @ F).real
    C = (Finv @ C_hat @ F).real
    P0 = (Finv @ (keep[:, None] * F)).real
    return S, C, P0


def dense_solve(coeff, H, dealias=False):
    """Solve (I - P0 M S) G = P0 M D+H directly; returns (F, G values)."""
    spec = coeff.spec
    B = spec.nblades
    n_tot = spec.N ** spec.dim * B
    S, C, P0 = dense_operators(spec, dealias)
    Mblk = np.zeros((n_tot, n_tot))
    for p, m in enumerate(coeff.matrices.reshape(-1, B, B)):
        Mblk[p * B:(p + 1) * B, p * B:(p + 1) * B] = m
    dph = MultivectorField.from_poly(spec, H.dirac(1)).total().ravel()
    A = np.eye(n_tot) - P0 @ Mblk @ S
    G = np.linalg.solve(A, P0 @ Mblk @ dph)
    Fper = (C @ G).reshape(spec.shape + (B,))
    return MultivectorField(spec, Fper, H), G.reshape(spec.shape + (B,))
