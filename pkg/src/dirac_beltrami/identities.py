"""Named invariant checks for the algebra and the grid operators.

Each check returns a :class:`Check` with the measured error and its
tolerance. ``delta_sign=-1`` flips the interior-derivative part of the grid
Dirac operators; it exists so the suite can be shown to catch a wrong sign.
"""
import itertools
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .exterior import (Multivector, PolyMultivector, clifford_pair, contract, dirac_blocks,
                       make_monogenic, symbol_matrix, wedge)
from .grid import GridSpec, _fft, _ifft
from .operators import SpectralOperator, beurling_values, project_mean_zero_values


@dataclass
class Check:
    name: str
    error: float
    tol: float

    @property
    def passed(self):
        return bool(np.isfinite(self.error) and self.error <= self.tol)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _basis(n):
    B = 1 << n
    return [Multivector(n, np.eye(B)[m]) for m in range(B)]


# ------------------------------------------------------------ algebra

def algebra_checks(n_max=4, trials=100, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    assoc = anti = adj = 0.0
    for n in range(1, n_max + 1):
        basis = _basis(n)
        g = [b.grade_of() for b in basis]
        for a, b in itertools.product(range(len(basis)), repeat=2):
            ab = wedge(basis[a], basis[b])
            ba = wedge(basis[b], basis[a])
            anti = max(anti, np.abs(ab.coeffs - (-1) ** (g[a] * g[b]) * ba.coeffs).max())
            for c in range(len(basis)):
                lhs = wedge(ab, basis[c])
                rhs = wedge(basis[a], wedge(basis[b], basis[c]))
                assoc = max(assoc, np.abs(lhs.coeffs - rhs.coeffs).max())
        for k in range(1, n + 1):
            v = Multivector.basis(n, k)
            for a, b in itertools.product(basis, repeat=2):
                adj = max(adj, abs(wedge(v, a).inner(b) - a.inner(contract(v, b))))
    out += [Check("wedge associativity", assoc, 0.0), Check("graded anticommutativity", anti, 0.0),
            Check("wedge/contraction adjointness", adj, 0.0)]

    cl_p = cl_m = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, n_max + 1))
        xi = rng.standard_normal(n)
        v = Multivector.vector(xi)
        r2 = xi @ xi
        for u in _basis(n):
            p, _ = clifford_pair(v, u)
            pp, _ = clifford_pair(v, p)
            _, m = clifford_pair(v, u)
            _, mm = clifford_pair(v, m)
            cl_p = max(cl_p, np.abs(pp.coeffs - r2 * u.coeffs).max())
            cl_m = max(cl_m, np.abs(mm.coeffs + r2 * u.coeffs).max())
    out += [Check("m+(v)^2 = |v|^2", cl_p, 1e-12), Check("m-(v)^2 = -|v|^2", cl_m, 1e-12)]

    dd = dl = 0.0
    for _ in range(trials // 4 or 1):
        n = int(rng.integers(1, n_max + 1))
        P = PolyMultivector(n, rng.integers(-5, 6, size=(1 << n,) + (5,) * n))
        dd = max(dd, P.d().d().max_abs())
        dl = max(dl, P.delta().delta().max_abs())
    out += [Check("poly d^2 = 0", dd, 0.0), Check("poly delta^2 = 0", dl, 0.0)]

    P = PolyMultivector.from_terms(2, [((1, 1), Multivector.scalar(2)),
                                       ((2, 0), Multivector.basis(2, 1)),
                                       ((0, 2), -Multivector.basis(2, 1))])
    out.append(Check("make_monogenic is monogenic", make_monogenic(P).dirac(-1).max_abs(), 0.0))
    return out


# ------------------------------------------------------------ grid operators

def band_limited(spec, rng, kmax=None):
    """Random real field with |k_j| <= kmax on every axis (default N/2 - 1)."""
    kmax = spec.N // 2 - 1 if kmax is None else kmax
    vals = rng.standard_normal(spec.shape + (spec.nblades,))
    vh = _fft(vals, spec.dim)
    k = np.abs(np.fft.fftfreq(spec.N, 1.0 / spec.N))
    keep = np.all(np.stack(np.meshgrid(*[k <= kmax] * spec.dim, indexing="ij")), axis=0)
    vh[~keep] = 0
    return _ifft(vh, spec.dim)


class _ModeOps:
    """First-order multipliers on flattened Fourier coefficients (P, B)."""

    def __init__(self, spec, delta_sign=1):
        from .exterior import contract_matrices, wedge_matrices
        self.spec = spec
        self.xi = spec.xi().reshape(spec.dim, -1)
        self.xi2 = np.sum(self.xi ** 2, axis=0)[:, None]
        self.W = wedge_matrices(spec.dim)
        self.C = delta_sign * contract_matrices(spec.dim)

    def _apply(self, vh, blocks):
        return 1j * _kernels.symbol_apply(vh, self.xi, blocks)

    def d(self, vh):
        return self._apply(vh, self.W)

    def delta(self, vh):
        return self._apply(vh, self.C)

    def dp(self, vh):
        return self._apply(vh, self.W + self.C)

    def dm(self, vh):
        return self._apply(vh, self.W - self.C)

    def lap(self, vh):
        return -self.xi2 * vh

    def beurling(self, vh):
        inv = np.where(self.xi2 > 0, 1 / np.where(self.xi2 > 0, self.xi2, 1), 0)
        return self.dp(self.dm(vh)) * inv


def _rel(a, b):
    scale = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / scale) if scale > 0 else float(np.linalg.norm(a))


def _inner(a, b):
    return float(np.real(np.vdot(a, b)))


def operator_checks(spec, trials=100, seed=0, delta_sign=1, tol=1e-10, unitary_tol=1e-11):
    """Relative L2 errors over ``trials`` random band-limited fields.

    Everything except S-unitarity is evaluated on Fourier coefficients
    (Parseval makes the errors equal to the grid L2 errors). Unitarity goes
    through the production ``beurling_values`` on grid values.
    """
    rng = np.random.default_rng(seed)
    ops = _ModeOps(spec, delta_sign)
    P, B = spec.N ** spec.dim, spec.nblades
    names = ("D+^2 = Lap", "D-^2 = -Lap", "D-D+ = -D+D-", "D+ skew-adjoint", "D- self-adjoint",
             "d^2 = 0", "delta^2 = 0", "S unitary on mean-zero", "S anticommutes with D+",
             "S anticommutes with D-")
    errs = dict.fromkeys(names, 0.0)

    def up(k, e):
        errs[k] = max(errs[k], e)

    for _ in range(trials):
        f = band_limited(spec, rng)
        g = band_limited(spec, rng)
        fh = _fft(f, spec.dim).reshape(P, B)
        gh = _fft(g, spec.dim).reshape(P, B)
        lap = ops.lap(fh)
        pf, mf = ops.dp(fh), ops.dm(fh)
        up("D+^2 = Lap", _rel(ops.dp(pf), lap))
        up("D-^2 = -Lap", _rel(ops.dm(mf), -lap))
        up("D-D+ = -D+D-", _rel(ops.dm(pf), -ops.dp(mf)))
        up("D+ skew-adjoint", abs(_inner(pf, gh) + _inner(fh, ops.dp(gh)))
           / (np.linalg.norm(pf) * np.linalg.norm(gh)))
        up("D- self-adjoint", abs(_inner(mf, gh) - _inner(fh, ops.dm(gh)))
           / (np.linalg.norm(mf) * np.linalg.norm(gh)))
        df, lf = ops.d(fh), ops.delta(fh)
        up("d^2 = 0", float(np.linalg.norm(ops.d(df)) / np.linalg.norm(df)))
        up("delta^2 = 0", float(np.linalg.norm(ops.delta(lf)) / np.linalg.norm(lf)))
        if delta_sign == 1:
            s = beurling_values(f, spec)
        else:
            s = _ifft(ops.beurling(fh).reshape(spec.shape + (B,)), spec.dim)
        p0 = project_mean_zero_values(f, spec)
        up("S unitary on mean-zero", abs(np.linalg.norm(s) / np.linalg.norm(p0) - 1))
        sf = ops.beurling(fh)
        up("S anticommutes with D+", _rel(ops.beurling(pf), -ops.dp(sf)))
        up("S anticommutes with D-", _rel(ops.beurling(mf), -ops.dm(sf)))
    out = [Check(f"{k} (n={spec.dim}, N={spec.N})", e,
                 unitary_tol if k.startswith("S unitary") else tol) for k, e in errs.items()]
    out.append(symbol_agreement(spec, delta_sign))
    return out


def symbol_agreement(spec, delta_sign=1):
    """Grid multiplier blocks vs the algebra's symbol at every lattice frequency."""
    n = spec.dim
    xi = spec.xi().reshape(n, -1).T
    err = 0.0
    # a strided subset of modes keeps the per-mode symbol calls cheap
    for name, sign in (("dirac+", 1), ("dirac-", -1)):
        op = SpectralOperator(name, n)
        ops = _ModeOps(spec, delta_sign)
        blocks = dirac_blocks(n, sign) if delta_sign == 1 else ops.W + sign * ops.C
        grid_sym = 1j * np.tensordot(xi, blocks, axes=1)
        for p in range(0, len(xi), max(1, len(xi) // 512)):
            err = max(err, np.abs(grid_sym[p] - op.symbol(xi[p])).max(),
                      np.abs(grid_sym[p] - 1j * symbol_matrix(xi[p], sign)).max())
    return Check(f"grid symbols match algebra symbols (n={n}, N={spec.N})", float(err), 0.0)


def run_suite(grids=((2, 64), (3, 32)), trials=100, seed=0, delta_sign=1, n_max=4):
    checks = algebra_checks(n_max=n_max, trials=trials, seed=seed)
    for n, N in grids:
        checks += operator_checks(GridSpec(n, N), trials=trials, seed=seed, delta_sign=delta_sign)
    return checks
