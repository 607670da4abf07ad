"""Divergence-form equations div A grad u = 0 and their Dirac-Beltrami lift.

With M the Cayley transform of A acting on grade 1 (zero elsewhere) and
F = u + v, v a bivector field, the grade-3 part of D- F = M D+ F reads dv = 0
and the grade-1 part reads (I - M) du = (I + M) delta v, i.e. delta v = A du.
Applying delta once more gives div(A grad u) = 0.
"""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from .exterior import Multivector, PolyMultivector, grades, wedge
from .grid import GridSpec, MultivectorField, _fft, _ifft, l2_norm
from .operators import apply_d, inverse_laplacian
from .solver import CoefficientField


def cayley_bound(lam, Lam, symmetric=True):
    """Upper bound on |(1-z)/(1+z)| over the admissible spectrum of A."""
    if symmetric:
        return max((1 - lam) / (1 + lam), (Lam - 1) / (Lam + 1))
    # normal A: Re z >= lam and |z| <= Lam
    return float(np.sqrt((1 + Lam ** 2 - 2 * lam) / (1 + Lam ** 2 + 2 * lam)))


class DivFormCoefficient:
    """Per-node n x n matrices with verified ellipticity constants."""

    def __init__(self, spec, A, lam=None, Lam=None, normal_tol=1e-10):
        n = spec.dim
        A = np.array(A, dtype=np.float64)
        if A.shape != spec.shape + (n, n):
            raise ValueError(f"A must have shape {spec.shape + (n, n)}")
        sym = 0.5 * (A + np.swapaxes(A, -1, -2))
        lam_min = float(np.linalg.eigvalsh(sym).min())
        lam_max = float(np.linalg.norm(A, ord=2, axis=(-2, -1)).max())
        if not lam_min > 0:
            raise ValueError(f"A is not elliptic: min <A v, v>/|v|^2 = {lam_min:.4g}")
        if lam is not None and lam > lam_min * (1 + 1e-12):
            raise ValueError(f"ellipticity bound lambda={lam} violated (actual {lam_min:.6g})")
        if Lam is not None and Lam < lam_max * (1 - 1e-12):
            raise ValueError(f"bound Lambda={Lam} violated (actual {lam_max:.6g})")
        At = np.swapaxes(A, -1, -2)
        comm = np.abs(At @ A - A @ At).max()
        A.flags.writeable = False
        self.spec = spec
        self.A = A
        self.lam = lam_min if lam is None else float(lam)
        self.Lam = lam_max if Lam is None else float(Lam)
        self.normal = bool(comm <= normal_tol * max(1.0, lam_max ** 2))
        self.symmetric = bool(np.abs(A - At).max() <= normal_tol * max(1.0, lam_max))

    def __repr__(self):
        return f"DivFormCoefficient(dim={self.spec.dim}, N={self.spec.N}, lam={self.lam:.4g}, Lam={self.Lam:.4g})"

    @classmethod
    def identity(cls, spec):
        return cls(spec, np.broadcast_to(np.eye(spec.dim), spec.shape + (spec.dim,) * 2))

    def apply(self, vec):
        """vec has shape (n, N, ..., N); returns A(x) vec(x) in the same layout."""
        return np.einsum("...ij,j...->i...", self.A, vec)


def cayley_matrices(A):
    """(I - A)(I + A)^{-1} per node."""
    n = A.shape[-1]
    I = np.eye(n)
    # X (I + A) = I - A  <=>  (I + A)^T X^T = (I - A)^T
    Xt = np.linalg.solve(np.swapaxes(I + A, -1, -2), np.swapaxes(I - A, -1, -2))
    return np.swapaxes(Xt, -1, -2)


def cayley(A):
    if not A.normal:
        raise ValueError("Cayley norm bound needs a normal coefficient")
    coeff = CoefficientField.from_grade1(A.spec, cayley_matrices(A.A))
    bound = cayley_bound(A.lam, A.Lam, A.symmetric)
    if coeff.M > bound + 1e-12:
        raise ArithmeticError(f"Cayley norm {coeff.M} exceeds bound {bound}")
    return coeff


def inverse_cayley(coeff):
    """Recover A = (I - M)(I + M)^{-1} from the grade-1 block."""
    return cayley_matrices(coeff.grade1_block())


# ------------------------------------------------------------ scalar fields

@dataclass(frozen=True)
class ScalarSolution:
    """u(x) = offset + <slope, x> + w(x) with w periodic and mean zero."""

    spec: GridSpec
    slope: np.ndarray
    w: np.ndarray
    offset: float = 0.0

    def gradient(self):
        spec = self.spec
        wh = _fft(self.w, spec.dim)
        xi = spec.xi()
        return np.stack([self.slope[k] + _ifft(1j * xi[k] * wh, spec.dim) for k in range(spec.dim)])

    def affine_poly(self):
        n = self.spec.dim
        terms = [((0,) * n, Multivector.scalar(n, self.offset))]
        for k in range(n):
            e = [0] * n
            e[k] = 1
            terms.append((tuple(e), Multivector.scalar(n, float(self.slope[k]))))
        return PolyMultivector.from_terms(n, terms, max_degree=1)

    def to_field(self):
        vals = np.zeros(self.spec.shape + (self.spec.nblades,))
        vals[..., 0] = self.w
        return MultivectorField(self.spec, vals, self.affine_poly())

    def values(self):
        return self.to_field().total()[..., 0]


def flux(u, A):
    return A.apply(u.gradient())


def div_residual(u, A, include_unresolved=True):
    """(residual, residual / ||A grad u||) of div A grad u = 0 on the grid.

    The residual is the L2 norm of the part of the flux (minus its mean) that
    is not the interior derivative of a periodic bivector: the H^-1 norm of
    div A grad u, plus the pure-Nyquist flux that every grid derivative
    annihilates. ``include_unresolved=False`` drops the latter, which is what
    an iterative solver can actually drive to zero.
    """
    spec = u.spec
    q = flux(u, A)
    xi = spec.xi()
    qh = [_fft(q[k], spec.dim) for k in range(spec.dim)]
    rh = sum(1j * xi[k] * qh[k] for k in range(spec.dim))
    xi2 = np.sum(xi ** 2, axis=0)
    nz = xi2 > 0
    # Parseval: h^n sum |f|^2 = h^n / N^n sum |f_hat|^2
    scale = spec.cell_volume / spec.N ** spec.dim
    val = np.sum(np.abs(rh[nz]) ** 2 / xi2[nz])
    if include_unresolved:
        nyq = ~nz
        nyq.flat[0] = False
        val += sum(np.sum(np.abs(qh[k][nyq]) ** 2) for k in range(spec.dim))
    r = float(np.sqrt(scale * val))
    qn = float(np.sqrt(spec.cell_volume * np.sum(q ** 2)))
    return r, (r / qn if qn > 0 else r)


def _mean_flux_bivector(m):
    """Linear bivector v with delta v = sum_k m_k e_k and dv = 0."""
    n = len(m)
    terms = []
    for k in range(n):
        for j in range(n):
            if j == k or m[k] == 0:
                continue
            e = [0] * n
            e[j] = 1
            blade = wedge(Multivector.basis(n, j + 1), Multivector.basis(n, k + 1))
            terms.append((tuple(e), blade * (m[k] / (n - 1))))
    return PolyMultivector.from_terms(n, terms, max_degree=1)


def lift(u, A, gate=1e-6):
    """F = u + v with v = d Lap^{-1}(A du - mean) plus a linear bivector carrying the mean flux."""
    spec = u.spec
    if spec != A.spec:
        raise ValueError("grid mismatch")
    if spec.dim < 2:
        raise ValueError("the lift needs dim >= 2")
    _, rel = div_residual(u, A)
    if rel > gate:
        raise ValueError(f"u fails the div-form residual gate: {rel:.3e} > {gate:.1e}")
    q = flux(u, A)
    m = q.reshape(spec.dim, -1).mean(axis=1)
    w1 = np.zeros(spec.shape + (spec.nblades,))
    for k in range(spec.dim):
        w1[..., 1 << k] = q[k] - m[k]
    v = apply_d(inverse_laplacian(MultivectorField(spec, w1)))
    vals = v.values.copy()
    vals[..., 0] = u.w
    poly = u.affine_poly() + _mean_flux_bivector(m)
    return MultivectorField(spec, vals, poly)


def extract_scalar(F, rtol=1e-8):
    """Grade-0 part of a grade-{0,2} field as a ScalarSolution."""
    spec = F.spec
    g = grades(spec.dim)
    total = F.total()
    bad = np.sqrt(spec.cell_volume * np.sum(total[..., (g != 0) & (g != 2)] ** 2))
    if bad > rtol * l2_norm(F):
        raise ValueError(f"field has components outside grades 0 and 2 (norm {bad:.3e})")
    n = spec.dim
    slope = np.zeros(n)
    offset = 0.0
    if F.poly is not None:
        p0 = F.poly.grade_project(0)
        if p0.degree > 1:
            raise ValueError("grade-0 polynomial part is not affine")
        c = p0.coeffs[0]
        offset = float(c[(0,) * n]) if p0.max_degree >= 0 else 0.0
        for k in range(n):
            e = [0] * n
            if p0.max_degree >= 1:
                e[k] = 1
                slope[k] = c[tuple(e)]
    w = F.values[..., 0]
    mean = float(w.mean())
    return ScalarSolution(spec, slope, w - mean, offset + mean)


# ------------------------------------------------------------ reference solver

def reference_solve(A, xi0, tol=1e-10, maxiter=500, stats=None):
    """Corrector problem div A(xi0 + grad w) = 0 for mean-zero periodic w.

    GMRES (CG when A is symmetric) on the spectral operator with an inverse
    Laplacian preconditioner. Raises RuntimeError when the H^-1 residual is
    still above ``tol`` after ``maxiter`` iterations. If ``stats`` is a dict
    the Krylov iteration count is stored under ``"iterations"``.
    """
    spec = A.spec
    n = spec.dim
    xi0 = np.asarray(xi0, dtype=float)
    xi = spec.xi()
    xi2 = np.sum(xi ** 2, axis=0)
    inv = np.where(xi2 > 0, 1.0 / np.where(xi2 > 0, xi2, 1.0), 0.0)
    P = spec.N ** n

    def grad(w):
        wh = _fft(w, n)
        return np.stack([_ifft(1j * xi[k] * wh, n) for k in range(n)])

    def div(q):
        return _ifft(sum(1j * xi[k] * _fft(q[k], n) for k in range(n)), n)

    def K(wflat):
        return -div(A.apply(grad(wflat.reshape(spec.shape)))).ravel()

    def precond(r):
        return _ifft(inv * _fft(r.reshape(spec.shape), n), n).ravel()

    const = np.broadcast_to(xi0.reshape((n,) + (1,) * n), (n,) + spec.shape)
    b = div(A.apply(const)).ravel()
    op = spla.LinearOperator((P, P), matvec=K, dtype=float)
    pre = spla.LinearOperator((P, P), matvec=precond, dtype=float)
    count = [0]

    def tick(_):
        count[0] += 1

    w = np.zeros(P)
    u = ScalarSolution(spec, xi0, w.reshape(spec.shape))
    used = 0
    while used < maxiter:
        chunk = min(100, maxiter - used)
        if A.symmetric:
            w, _ = spla.cg(op, b, x0=w, rtol=1e-14, atol=0.0, maxiter=chunk, M=pre, callback=tick)
        else:
            w, _ = spla.gmres(op, b, x0=w, rtol=1e-14, atol=0.0, restart=50, maxiter=max(1, chunk // 50),
                              M=pre, callback=tick, callback_type="pr_norm")
        used += chunk
        w = w - w.mean()
        u = ScalarSolution(spec, xi0, w.reshape(spec.shape))
        if div_residual(u, A, include_unresolved=False)[0] < tol:
            if stats is not None:
                stats["iterations"] = count[0]
            return u
    raise RuntimeError(f"reference_solve did not reach tol={tol:g} in {maxiter} iterations "
                       f"(residual {div_residual(u, A, include_unresolved=False)[0]:.3e})")


# ------------------------------------------------------------ coefficients

def smooth_scalar(spec, rng, modes=2):
    """Random real trigonometric polynomial with |k| <= modes, scaled to [-1, 1]."""
    x = spec.coords()
    out = np.zeros(spec.shape)
    for kv in np.ndindex(*(2 * modes + 1,) * spec.dim):
        k = np.array(kv) - modes
        if not k.any():
            continue
        phase = np.tensordot(k * 2 * np.pi / spec.L, x, axes=1)
        a, b = rng.standard_normal(2)
        out += (a * np.cos(phase) + b * np.sin(phase)) / (1 + k @ k)
    return out / np.abs(out).max()


def random_symmetric(spec, rng, lam=0.5, Lam=2.0, modes=2):
    """Smooth symmetric A(x) with spectrum inside [lam, Lam]."""
    n = spec.dim
    S = np.zeros(spec.shape + (n, n))
    for i in range(n):
        for j in range(i, n):
            s = smooth_scalar(spec, rng, modes)
            S[..., i, j] += s
            S[..., j, i] += s if i != j else 0.0
    evals, vecs = np.linalg.eigh(S)
    lo, hi = evals.min(), evals.max()
    t = (evals - lo) / (hi - lo) if hi > lo else np.full_like(evals, 0.5)
    mapped = lam + (Lam - lam) * t
    A = np.einsum("...ij,...j,...kj->...ik", vecs, mapped, vecs)
    return DivFormCoefficient(spec, A)


def random_normal_2d(spec, rng, lam=0.5, Lam=2.0, modes=2):
    """n = 2 normal, non-symmetric A = a I + b J with a >= lam and |a + ib| < Lam."""
    if spec.dim != 2:
        raise ValueError("random_normal_2d needs dim = 2")
    if lam > 0.7 * Lam:
        raise ValueError("need lam <= 0.7 * Lam")
    a = lam + (0.7 * Lam - lam) * 0.5 * (1 + smooth_scalar(spec, rng, modes))
    b = 0.7 * Lam * smooth_scalar(spec, rng, modes)
    A = np.stack([np.stack([a, -b], -1), np.stack([b, a], -1)], -2)
    return DivFormCoefficient(spec, A)


def layered(spec, a):
    """A = diag(a(x_1), 1, ..., 1) with ``a`` sampled from a callable of x_1."""
    n = spec.dim
    A = np.broadcast_to(np.eye(n), spec.shape + (n, n)).copy()
    A[..., 0, 0] = a(spec.coords()[0])
    return DivFormCoefficient(spec, A)


# ------------------------------------------------------------------ .dfc IO

def write_dfc(path, A):
    header = {"n": A.spec.dim, "N": A.spec.N, "L": A.spec.L, "lambda": A.lam, "Lambda": A.Lam}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(A.A.astype("<f8").tobytes())


def read_dfc(path):
    raw = Path(path).read_bytes()
    head, _, body = raw.partition(b"\n")
    header = json.loads(head.decode("utf-8"))
    spec = GridSpec(header["n"], header["N"], header["L"])
    n = spec.dim
    A = np.frombuffer(body, dtype="<f8")
    if A.size != spec.N ** n * n * n:
        raise ValueError("coefficient file size does not match its header")
    return DivFormCoefficient(spec, A.reshape(spec.shape + (n, n)),
                              lam=header.get("lambda"), Lam=header.get("Lambda"))
