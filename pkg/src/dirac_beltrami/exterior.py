"""Exterior algebra of R^n on a dense blade basis.

Blades are bitmasks over the axes: bit ``k-1`` set means ``e_k`` is a factor.
A multivector stores one coefficient per mask, in mask order, so index ``0`` is
the scalar part and index ``0b11`` is ``e_12``.

The interior derivative is ``delta = sum_k e_k _| d/dx_k``. With ``d = sum_k
e_k ^ d/dx_k`` this gives ``<dP, Q> = -<P, delta Q>``, i.e. ``delta`` is minus
the formal adjoint of ``d``.
"""
from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import NamedTuple

import numpy as np

MAX_DIM = 6


def _check_dim(n):
    if not 1 <= n <= MAX_DIM:
        raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {n}")


class BladeIndex(NamedTuple):
    mask: int

    @property
    def grade(self):
        return bin(self.mask).count("1")

    @property
    def axes(self):
        """1-based axes in ascending order."""
        return tuple(k + 1 for k in range(self.mask.bit_length()) if self.mask >> k & 1)

    @classmethod
    def from_axes(cls, *axes):
        mask = 0
        for a in axes:
            if a < 1:
                raise ValueError("axes are 1-based")
            bit = 1 << (a - 1)
            if mask & bit:
                raise ValueError(f"repeated axis {a}")
            mask |= bit
        return cls(mask)

    def label(self):
        return "1" if self.mask == 0 else "e" + "".join(str(a) for a in self.axes)


def blades(n):
    _check_dim(n)
    return [BladeIndex(m) for m in range(1 << n)]


@lru_cache(maxsize=None)
def grades(n):
    g = np.array([bin(m).count("1") for m in range(1 << n)])
    g.flags.writeable = False
    return g


def merge_sign(a, b):
    """Sign of e_a ^ e_b relative to e_{a|b}; 0 when the blades overlap."""
    if a & b:
        return 0
    # count pairs (i in a, j in b) with i > j
    swaps = 0
    b_rest = b
    while b_rest:
        j = b_rest & -b_rest
        swaps += bin(a & ~(2 * j - 1)).count("1")
        b_rest ^= j
    return -1 if swaps & 1 else 1


@lru_cache(maxsize=None)
def _sign_table(n):
    B = 1 << n
    t = np.array([[merge_sign(a, b) for b in range(B)] for a in range(B)], dtype=np.int8)
    t.flags.writeable = False
    return t


@lru_cache(maxsize=None)
def wedge_matrices(n):
    """(n, 2^n, 2^n) real matrices of u -> e_k ^ u for k = 1..n."""
    _check_dim(n)
    B = 1 << n
    mats = np.zeros((n, B, B))
    for k in range(n):
        bit = 1 << k
        for m in range(B):
            if not m & bit:
                mats[k, m | bit, m] = merge_sign(bit, m)
    mats.flags.writeable = False
    return mats


@lru_cache(maxsize=None)
def contract_matrices(n):
    """(n, 2^n, 2^n) real matrices of u -> e_k _| u (transposes of the wedge maps)."""
    mats = np.ascontiguousarray(np.transpose(wedge_matrices(n), (0, 2, 1)))
    mats.flags.writeable = False
    return mats


@lru_cache(maxsize=None)
def dirac_blocks(n, sign):
    """Matrices ``e_k ^ + sign * e_k _|`` whose xi-combination is the symbol m^sign(xi)."""
    blocks = wedge_matrices(n) + sign * contract_matrices(n)
    blocks.flags.writeable = False
    return blocks


@dataclass(frozen=True, eq=False)
class Multivector:
    dim: int
    coeffs: np.ndarray

    def __post_init__(self):
        _check_dim(self.dim)
        c = np.asarray(self.coeffs)
        if c.shape != (1 << self.dim,):
            raise ValueError(f"expected {1 << self.dim} coefficients, got shape {c.shape}")
        if not np.iscomplexobj(c):
            c = c.astype(np.float64)
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, n, dtype=float):
        return cls(n, np.zeros(1 << n, dtype=dtype))

    @classmethod
    def scalar(cls, n, value=1.0):
        c = np.zeros(1 << n, dtype=np.result_type(float, type(value)))
        c[0] = value
        return cls(n, c)

    @classmethod
    def basis(cls, n, *axes):
        """The blade e_{axes}; the axes must be distinct but may be unsorted."""
        sorted_mask = 0
        sign = 1
        for a in axes:
            idx = BladeIndex.from_axes(a).mask
            s = merge_sign(sorted_mask, idx)
            if s == 0:
                return cls.zero(n)
            sign *= s
            sorted_mask |= idx
        if sorted_mask >= 1 << n:
            raise ValueError(f"axis out of range for dimension {n}")
        c = np.zeros(1 << n)
        c[sorted_mask] = sign
        return cls(n, c)

    @classmethod
    def vector(cls, values):
        values = np.asarray(values)
        n = values.shape[0]
        c = np.zeros(1 << n, dtype=np.result_type(values, float))
        for k in range(n):
            c[1 << k] = values[k]
        return cls(n, c)

    def _other(self, other):
        if not isinstance(other, Multivector):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return other

    def __add__(self, other):
        other = self._other(other)
        if other is NotImplemented:
            return other
        return Multivector(self.dim, self.coeffs + other.coeffs)

    def __sub__(self, other):
        other = self._other(other)
        if other is NotImplemented:
            return other
        return Multivector(self.dim, self.coeffs - other.coeffs)

    def __neg__(self):
        return Multivector(self.dim, -self.coeffs)

    def __mul__(self, s):
        if isinstance(s, Multivector):
            return NotImplemented
        return Multivector(self.dim, self.coeffs * s)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return Multivector(self.dim, self.coeffs / s)

    def __eq__(self, other):
        if not isinstance(other, Multivector):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash((self.dim, self.coeffs.tobytes()))

    def __repr__(self):
        terms = [f"{c:g}*{BladeIndex(m).label()}" for m, c in enumerate(self.coeffs) if c != 0]
        return f"Multivector({self.dim}: {' + '.join(terms) or '0'})"

    def __getitem__(self, blade):
        if isinstance(blade, BladeIndex):
            blade = blade.mask
        return self.coeffs[blade]

    def inner(self, other):
        other = self._other(other)
        return np.vdot(self.coeffs, other.coeffs)

    def norm(self):
        return float(np.linalg.norm(self.coeffs))

    def grade_of(self):
        """The single grade of a homogeneous nonzero element, else None."""
        gs = set(grades(self.dim)[self.coeffs != 0].tolist())
        return gs.pop() if len(gs) == 1 else None

    def isclose(self, other, atol=1e-12):
        other = self._other(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol))


def wedge(u, v):
    if u.dim != v.dim:
        raise ValueError(f"dimension mismatch: {u.dim} vs {v.dim}")
    n = u.dim
    B = 1 << n
    table = _sign_table(n)
    idx = np.arange(B)
    target = idx[:, None] | idx[None, :]
    prod = table * np.multiply.outer(u.coeffs, v.coeffs)
    out = np.zeros(B, dtype=prod.dtype)
    np.add.at(out, target.ravel(), prod.ravel())
    return Multivector(n, out)


def _vector_part(v):
    if v.grade_of() not in (1, None) or (v.grade_of() is None and np.any(v.coeffs)):
        raise ValueError("expected a homogeneous grade-1 multivector")
    return np.array([v.coeffs[1 << k] for k in range(v.dim)])


def contract(v, u):
    """Left interior product v _| u for grade-1 v."""
    if v.dim != u.dim:
        raise ValueError(f"dimension mismatch: {v.dim} vs {u.dim}")
    a = _vector_part(v)
    mats = np.tensordot(a, contract_matrices(v.dim), axes=1)
    return Multivector(v.dim, mats @ u.coeffs)


def clifford_pair(v, u):
    """(v ^ u + v _| u, v ^ u - v _| u): the two Dirac symbols applied to u."""
    if v.dim != u.dim:
        raise ValueError(f"dimension mismatch: {v.dim} vs {u.dim}")
    a = _vector_part(v)
    w = np.tensordot(a, wedge_matrices(v.dim), axes=1) @ u.coeffs
    c = np.tensordot(a, contract_matrices(v.dim), axes=1) @ u.coeffs
    return Multivector(v.dim, w + c), Multivector(v.dim, w - c)


def symbol_matrix(xi, sign):
    """Real 2^n x 2^n matrix of u -> xi ^ u + sign * xi _| u."""
    xi = np.asarray(xi, dtype=float)
    return np.tensordot(xi, dirac_blocks(len(xi), sign), axes=1)


def grade_project(u, k):
    if not 0 <= k <= u.dim:
        raise ValueError(f"grade {k} out of range 0..{u.dim}")
    return Multivector(u.dim, np.where(grades(u.dim) == k, u.coeffs, 0))


# ------------------------------------------------------------- polynomials

class PolyMultivector:
    """Multivector-valued polynomial in x_1..x_n.

    ``coeffs[b, a_1, ..., a_n]`` is the coefficient of blade ``b`` on the
    monomial ``x_1^a_1 ... x_n^a_n``. Total degree is capped at ``max_degree``.
    """

    __slots__ = ("dim", "max_degree", "coeffs")

    def __init__(self, dim, coeffs):
        _check_dim(dim)
        coeffs = np.array(coeffs, dtype=np.float64)
        if coeffs.ndim != dim + 1 or coeffs.shape[0] != 1 << dim:
            raise ValueError("coefficient array must have shape (2^n, D+1, ..., D+1)")
        D = coeffs.shape[1] - 1
        if any(s != D + 1 for s in coeffs.shape[1:]):
            raise ValueError("all exponent axes must have the same length")
        coeffs.flags.writeable = False
        self.dim = dim
        self.max_degree = D
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, n, max_degree):
        return cls(n, np.zeros((1 << n,) + (max_degree + 1,) * n))

    @classmethod
    def from_terms(cls, n, terms, max_degree=None):
        """Build from ``[(exponent tuple, Multivector or coefficient array), ...]``."""
        terms = list(terms)
        if max_degree is None:
            max_degree = max([sum(e) for e, _ in terms] or [0])
        c = np.zeros((1 << n,) + (max_degree + 1,) * n)
        for exponent, value in terms:
            if len(exponent) != n:
                raise ValueError("exponent length must equal the dimension")
            if sum(exponent) > max_degree:
                raise ValueError("term exceeds max_degree")
            vals = value.coeffs if isinstance(value, Multivector) else np.asarray(value)
            c[(slice(None),) + tuple(exponent)] += vals
        return cls(n, c)

    @classmethod
    def constant(cls, mv, max_degree=0):
        return cls.from_terms(mv.dim, [((0,) * mv.dim, mv)], max_degree)

    @classmethod
    def coordinate(cls, n, k, mv=None, max_degree=1):
        """x_k times ``mv`` (scalar 1 by default); ``k`` is 1-based."""
        mv = Multivector.scalar(n) if mv is None else mv
        e = [0] * n
        e[k - 1] = 1
        return cls.from_terms(n, [(tuple(e), mv)], max_degree)

    @classmethod
    def from_scalar(cls, scalar_coeffs, blade=0):
        """Lift a scalar coefficient array of shape (D+1,)*n onto one blade."""
        scalar_coeffs = np.asarray(scalar_coeffs, dtype=float)
        n = scalar_coeffs.ndim
        c = np.zeros((1 << n,) + scalar_coeffs.shape)
        c[blade] = scalar_coeffs
        return cls(n, c)

    # -- structure

    def _exponent_grid(self):
        return np.indices((self.max_degree + 1,) * self.dim).sum(axis=0)

    @property
    def degree(self):
        """Largest total degree with a nonzero coefficient (-1 for the zero polynomial)."""
        nz = np.any(self.coeffs != 0, axis=0)
        if not nz.any():
            return -1
        return int(self._exponent_grid()[nz].max())

    @property
    def terms(self):
        out = []
        for e in np.ndindex(*(self.max_degree + 1,) * self.dim):
            c = self.coeffs[(slice(None),) + e]
            if np.any(c):
                out.append((e, Multivector(self.dim, c)))
        return out

    def _match(self, other):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        D = max(self.max_degree, other.max_degree)
        return self.with_max_degree(D).coeffs, other.with_max_degree(D).coeffs

    def with_max_degree(self, D):
        if D == self.max_degree:
            return self
        if D < self.degree:
            raise ValueError("cannot truncate below the actual degree")
        c = np.zeros((1 << self.dim,) + (D + 1,) * self.dim)
        m = min(D, self.max_degree) + 1
        sl = (slice(None),) + (slice(0, m),) * self.dim
        c[sl] = self.coeffs[sl]
        return PolyMultivector(self.dim, c)

    def __add__(self, other):
        if not isinstance(other, PolyMultivector):
            return NotImplemented
        a, b = self._match(other)
        return PolyMultivector(self.dim, a + b)

    def __sub__(self, other):
        if not isinstance(other, PolyMultivector):
            return NotImplemented
        a, b = self._match(other)
        return PolyMultivector(self.dim, a - b)

    def __neg__(self):
        return PolyMultivector(self.dim, -self.coeffs)

    def __mul__(self, s):
        return PolyMultivector(self.dim, self.coeffs * s)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, PolyMultivector):
            return NotImplemented
        a, b = self._match(other)
        return bool(np.array_equal(a, b))

    __hash__ = None

    def __repr__(self):
        return f"PolyMultivector(dim={self.dim}, degree={self.degree}, terms={len(self.terms)})"

    def is_zero(self, atol=0.0):
        return bool(np.all(np.abs(self.coeffs) <= atol))

    def max_abs(self):
        return float(np.abs(self.coeffs).max(initial=0.0))

    # -- algebra on the blade axis

    def blade_map(self, mat):
        """Apply a fixed 2^n x 2^n matrix to every coefficient."""
        return PolyMultivector(self.dim, np.tensordot(mat, self.coeffs, axes=(1, 0)))

    def grade_project(self, k):
        if not 0 <= k <= self.dim:
            raise ValueError(f"grade {k} out of range 0..{self.dim}")
        mask = (grades(self.dim) == k).reshape((-1,) + (1,) * self.dim)
        return PolyMultivector(self.dim, np.where(mask, self.coeffs, 0.0))

    # -- calculus

    def partial(self, k):
        """Exact derivative in x_k, ``k`` 0-based."""
        D = self.max_degree
        c = np.zeros_like(self.coeffs)
        ax = k + 1
        src = np.moveaxis(self.coeffs, ax, -1)[..., 1:]
        src = src * np.arange(1, D + 1)
        dst = np.moveaxis(c, ax, -1)
        dst[..., :D] = src
        return PolyMultivector(self.dim, c)

    def d(self):
        W = wedge_matrices(self.dim)
        out = sum(np.tensordot(W[k], self.partial(k).coeffs, axes=(1, 0)) for k in range(self.dim))
        return PolyMultivector(self.dim, out)

    def delta(self):
        C = contract_matrices(self.dim)
        out = sum(np.tensordot(C[k], self.partial(k).coeffs, axes=(1, 0)) for k in range(self.dim))
        return PolyMultivector(self.dim, out)

    def dirac(self, sign):
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        blocks = dirac_blocks(self.dim, sign)
        out = sum(np.tensordot(blocks[k], self.partial(k).coeffs, axes=(1, 0)) for k in range(self.dim))
        return PolyMultivector(self.dim, out)

    def laplacian(self):
        out = PolyMultivector.zeros(self.dim, self.max_degree)
        for k in range(self.dim):
            out = out + self.partial(k).partial(k)
        return out

    # -- evaluation

    def evaluate_axes(self, axes):
        """Evaluate on the tensor grid spanned by 1-D coordinate arrays.

        Returns an array of shape (len(axes[0]), ..., len(axes[n-1]), 2^n).
        """
        if len(axes) != self.dim:
            raise ValueError("need one coordinate array per axis")
        D = self.max_degree
        powers = [np.asarray(a, dtype=float)[:, None] ** np.arange(D + 1) for a in axes]
        out = np.moveaxis(self.coeffs, 0, -1)
        # each pass contracts the leading exponent axis and appends a node axis
        for p in powers:
            out = np.tensordot(out, p, axes=(0, 1))
        return np.moveaxis(out, 0, -1)

    def evaluate(self, points):
        """Evaluate at points of shape (P, n); returns (P, 2^n)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        D = self.max_degree
        mono = np.ones((points.shape[0],) + (D + 1,) * self.dim)
        for k in range(self.dim):
            shape = [1] * (self.dim + 1)
            shape[0] = -1
            shape[k + 1] = D + 1
            mono = mono * (points[:, k][:, None] ** np.arange(D + 1)).reshape(shape)
        return np.tensordot(mono, self.coeffs, axes=(list(range(1, self.dim + 1)),
                                                     list(range(1, self.dim + 1))))

    def __call__(self, x):
        return Multivector(self.dim, self.evaluate(np.asarray(x, dtype=float)[None, :])[0])


def poly_d(P):
    return P.d()


def poly_delta(P):
    return P.delta()


def is_harmonic(P, rtol=1e-12):
    lap = P.laplacian()
    scale = max(P.max_abs(), 1e-300) * max(P.max_degree, 1) ** 2
    return lap.is_zero(atol=rtol * scale)


def is_monogenic(H, rtol=1e-12):
    res = H.dirac(-1)
    scale = max(H.max_abs(), 1e-300) * max(H.max_degree, 1)
    return res.is_zero(atol=rtol * scale)


def make_monogenic(P, rtol=1e-12):
    """H = (d - delta) P for componentwise harmonic P; then (d - delta) H = -Laplacian P = 0."""
    if not is_harmonic(P, rtol):
        raise ValueError("polynomial is not componentwise harmonic")
    return P.dirac(-1)


def harmonic_basis(n, degree):
    """Integer-coefficient basis of scalar harmonic polynomials of degree <= ``degree``.

    Returns an int array of shape (K, degree+1, ..., degree+1). For each
    monomial p(x') * x_n^s with s in {0, 1}, the basis element is
    sum_j (-1)^j x_n^(2j+s) / (2j+s)! * Lap'^j p, scaled to integers.
    """
    _check_dim(n)
    D = degree
    shape = (D + 1,) * n
    out = []
    for total in range(D + 1):
        for s in (0, 1):
            if n == 1:
                if total == s:
                    c = np.zeros(shape, dtype=np.int64)
                    c[s] = 1
                    out.append(c)
                continue
            for e in np.ndindex(*(total + 1,) * (n - 1)):
                if sum(e) != total - s:
                    continue
                # the (n-1)-variable monomial and its iterated Laplacians
                scale = factorial(total)
                c = np.zeros(shape, dtype=np.int64)
                cur = {tuple(e): 1}
                j = 0
                while cur:
                    power = 2 * j + s
                    fac = (-1) ** j * (scale // factorial(power))
                    for mono, v in cur.items():
                        c[mono + (power,)] += fac * v
                    nxt = {}
                    for mono, v in cur.items():
                        for k in range(n - 1):
                            if mono[k] >= 2:
                                m2 = list(mono)
                                m2[k] -= 2
                                nxt[tuple(m2)] = nxt.get(tuple(m2), 0) + v * mono[k] * (mono[k] - 1)
                    cur = {m: v for m, v in nxt.items() if v}
                    j += 1
                out.append(c)
    return np.array(out)
