"""Periodic grids carrying multivector fields, transforms and norms.

Nodes sit at ``x_j = -L/2 + j*h`` on each axis, so the box is centred at the
origin. A field is a periodic array of node values plus an optional
polynomial part that is kept symbolic; only the periodic part is ever
Fourier transformed.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft

from .exterior import BladeIndex, PolyMultivector, grades

_WORKERS = 1


def set_threads(k):
    """Worker count handed to scipy.fft."""
    global _WORKERS
    _WORKERS = max(1, int(k))


@dataclass(frozen=True)
class GridSpec:
    dim: int
    N: int
    L: float = 2 * np.pi

    def __post_init__(self):
        if not 1 <= self.dim <= 6:
            raise ValueError("dim must be in 1..6")
        if self.N < 2 or self.N % 2:
            raise ValueError(f"N must be even and >= 2, got {self.N}")
        if not self.L > 0:
            raise ValueError("L must be positive")
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self):
        return self.L / self.N

    @property
    def shape(self):
        return (self.N,) * self.dim

    @property
    def nblades(self):
        return 1 << self.dim

    @property
    def cell_volume(self):
        return self.h ** self.dim

    @property
    def volume(self):
        return self.L ** self.dim

    def axis(self):
        return -self.L / 2 + self.h * np.arange(self.N)

    def coords(self):
        """Node coordinates, shape (n, N, ..., N)."""
        return np.stack(np.meshgrid(*[self.axis()] * self.dim, indexing="ij"))

    def wavenumbers(self, zero_nyquist=True):
        """Per-axis angular frequencies 2*pi*k/L; the k = -N/2 entry is zeroed by default."""
        k = scipy.fft.fftfreq(self.N, d=1.0 / self.N)
        if zero_nyquist:
            k[self.N // 2] = 0.0
        return 2 * np.pi / self.L * k

    def xi(self, zero_nyquist=True):
        """Frequency components on the full lattice, shape (n, N, ..., N)."""
        k = self.wavenumbers(zero_nyquist)
        return np.stack(np.meshgrid(*[k] * self.dim, indexing="ij"))

    def kernel_mask(self):
        """Modes annihilated by every derivative multiplier: xi = 0 after Nyquist zeroing."""
        return np.all(self.xi() == 0, axis=0)

    def dealias_mask(self):
        """2/3-rule: keep modes with |k_j| < N/3 on every axis."""
        k = np.abs(scipy.fft.fftfreq(self.N, d=1.0 / self.N))
        keep = k < self.N / 3
        return np.all(np.stack(np.meshgrid(*[keep] * self.dim, indexing="ij")), axis=0)

    def refined(self, factor=2):
        return GridSpec(self.dim, self.N * factor, self.L)

    def doubled_box(self):
        """Same spacing, twice the period."""
        return GridSpec(self.dim, self.N * 2, self.L * 2)


class MultivectorField:
    """Multivector per node plus an optional symbolic polynomial part."""

    __slots__ = ("spec", "values", "poly", "_poly_cache")

    def __init__(self, spec, values, poly=None):
        values = np.array(values, dtype=np.float64)
        expected = spec.shape + (spec.nblades,)
        if values.shape != expected:
            raise ValueError(f"values must have shape {expected}, got {values.shape}")
        if poly is not None and poly.dim != spec.dim:
            raise ValueError("polynomial part has the wrong dimension")
        values.flags.writeable = False
        self.spec = spec
        self.values = values
        self.poly = poly
        self._poly_cache = None

    @classmethod
    def zeros(cls, spec):
        return cls(spec, np.zeros(spec.shape + (spec.nblades,)))

    @classmethod
    def from_poly(cls, spec, poly):
        return cls(spec, np.zeros(spec.shape + (spec.nblades,)), poly)

    @classmethod
    def from_function(cls, spec, fn):
        """``fn(x)`` receives coordinates of shape (n, N, ..., N) and returns (..., 2^n)."""
        return cls(spec, fn(spec.coords()))

    @classmethod
    def constant(cls, spec, mv):
        return cls(spec, np.broadcast_to(mv.coeffs, spec.shape + (spec.nblades,)))

    def poly_values(self):
        if self.poly is None:
            return 0.0
        if self._poly_cache is None:
            pv = self.poly.evaluate_axes([self.spec.axis()] * self.spec.dim)
            pv.flags.writeable = False
            self._poly_cache = pv
        return self._poly_cache

    def total(self):
        """Node values including the sampled polynomial part."""
        if self.poly is None:
            return self.values
        return self.values + self.poly_values()

    def periodic_part(self):
        return MultivectorField(self.spec, self.values)

    def _combine(self, other, op):
        if not isinstance(other, MultivectorField):
            return NotImplemented
        if other.spec != self.spec:
            raise ValueError("grid mismatch")
        if self.poly is None:
            poly = None if other.poly is None else op(PolyMultivector.zeros(self.spec.dim, 0), other.poly)
        else:
            poly = self.poly if other.poly is None else op(self.poly, other.poly)
        return MultivectorField(self.spec, op(self.values, other.values), poly)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __neg__(self):
        return MultivectorField(self.spec, -self.values, None if self.poly is None else -self.poly)

    def __mul__(self, s):
        return MultivectorField(self.spec, self.values * s, None if self.poly is None else self.poly * s)

    __rmul__ = __mul__

    def grade_project(self, k):
        g = grades(self.spec.dim) == k
        poly = None if self.poly is None else self.poly.grade_project(k)
        return MultivectorField(self.spec, np.where(g, self.values, 0.0), poly)

    def grade_norms(self):
        """L2 norm of each grade of the total field."""
        tot = self.total()
        g = grades(self.spec.dim)
        return [np.sqrt(self.spec.cell_volume * np.sum(tot[..., g == k] ** 2)) for k in range(self.spec.dim + 1)]

    def mean(self):
        """Box average of the periodic part, per blade."""
        return self.values.reshape(-1, self.spec.nblades).mean(axis=0)


@dataclass(frozen=True)
class SpectralField:
    """Unnormalized DFT of the periodic part of a field, per blade channel."""

    spec: GridSpec
    coeffs: np.ndarray = field(repr=False)


def fft_forward(f):
    if f.poly is not None and not f.poly.is_zero():
        raise ValueError("only periodic fields can be transformed; use periodic_part()")
    axes = tuple(range(f.spec.dim))
    return SpectralField(f.spec, scipy.fft.fftn(f.values, axes=axes, workers=_WORKERS))


def fft_inverse(s):
    axes = tuple(range(s.spec.dim))
    vals = scipy.fft.ifftn(s.coeffs, axes=axes, workers=_WORKERS)
    return MultivectorField(s.spec, vals.real)


def _fft(values, dim):
    return scipy.fft.fftn(values, axes=tuple(range(dim)), workers=_WORKERS)


def _ifft(coeffs, dim):
    return scipy.fft.ifftn(coeffs, axes=tuple(range(dim)), workers=_WORKERS).real


def partial(f, k):
    """Derivative in x_k (0-based): spectral on the periodic part, exact on the polynomial."""
    spec = f.spec
    xi = spec.wavenumbers()
    shape = [1] * spec.dim + [1]
    shape[k] = spec.N
    vals = _ifft(1j * xi.reshape(shape) * _fft(f.values, spec.dim), spec.dim)
    poly = None if f.poly is None else f.poly.partial(k)
    return MultivectorField(spec, vals, poly)


@dataclass(frozen=True)
class SubdomainSpec:
    """Nested boxes U inside V centred at ``center`` with half-widths ``inner`` < ``outer``.

    The cutoff is a product of raised-cosine profiles: 1 on U, 0 outside V.
    """

    inner: float
    outer: float
    center: tuple = None

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ValueError("need 0 < inner < outer")

    @classmethod
    def fractions(cls, spec, inner, outer):
        """Half-widths given as fractions of the half box length."""
        return cls(inner * spec.L / 2, outer * spec.L / 2)

    def validate(self, spec):
        c = self._center(spec)
        if np.any(np.abs(c) + self.outer >= spec.L / 2):
            raise ValueError("outer box must lie strictly inside the periodic box")

    def _center(self, spec):
        return np.zeros(spec.dim) if self.center is None else np.asarray(self.center, dtype=float)

    def _offsets(self, spec):
        c = self._center(spec)
        x = spec.coords()
        return np.abs(x - c.reshape((-1,) + (1,) * spec.dim))

    def inner_mask(self, spec):
        return np.all(self._offsets(spec) <= self.inner * (1 + 1e-12), axis=0)

    def outer_mask(self, spec):
        return np.all(self._offsets(spec) <= self.outer * (1 + 1e-12), axis=0)

    def _profile(self, t):
        a, b = self.inner, self.outer
        s = np.clip((t - a) / (b - a), 0.0, 1.0)
        return 0.5 * (1 + np.cos(np.pi * s))

    def _profile_slope(self, t):
        a, b = self.inner, self.outer
        s = (t - a) / (b - a)
        inside = (s > 0) & (s < 1)
        return np.where(inside, -0.5 * np.pi / (b - a) * np.sin(np.pi * np.clip(s, 0, 1)), 0.0)

    def cutoff(self, spec):
        self.validate(spec)
        t = self._offsets(spec)
        return np.prod(self._profile(t), axis=0)

    def cutoff_gradient(self, spec):
        """Shape (n, N, ..., N)."""
        self.validate(spec)
        c = self._center(spec)
        x = spec.coords() - c.reshape((-1,) + (1,) * spec.dim)
        t = np.abs(x)
        prof = self._profile(t)
        grads = []
        for k in range(spec.dim):
            g = self._profile_slope(t[k]) * np.sign(x[k])
            for j in range(spec.dim):
                if j != k:
                    g = g * prof[j]
            grads.append(g)
        return np.stack(grads)


def _region(spec, mask):
    if mask is None:
        return None
    if isinstance(mask, SubdomainSpec):
        return mask.inner_mask(spec)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != spec.shape:
        raise ValueError("mask shape does not match the grid")
    return mask


def _masked_sumsq(values, region):
    sq = np.sum(values ** 2, axis=-1)
    if region is not None:
        sq = np.where(region, sq, 0.0)
    return float(np.sum(sq))


def l2_norm(f, mask=None):
    """sqrt(h^n * sum |F|^2) over the nodes of ``mask`` (a SubdomainSpec's U, or a bool array)."""
    region = _region(f.spec, mask)
    return float(np.sqrt(f.spec.cell_volume * _masked_sumsq(f.total(), region)))


def sobolev_norm(f, mask=None):
    """(||F||^2 + sum_k ||d_k F||^2)^(1/2) with spectral derivatives."""
    region = _region(f.spec, mask)
    total = _masked_sumsq(f.total(), region)
    for k in range(f.spec.dim):
        total += _masked_sumsq(partial(f, k).total(), region)
    return float(np.sqrt(f.spec.cell_volume * total))


def gradient_sq(f):
    """|grad (x) F|^2 per node: all first partials of all blade components."""
    out = np.zeros(f.spec.shape)
    for k in range(f.spec.dim):
        out += np.sum(partial(f, k).total() ** 2, axis=-1)
    return out


# ------------------------------------------------------------------ .mvf IO

def _sidecar(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_mvf(path, f):
    """Write ``path`` (raw little-endian float64, node-major, blade-minor) and ``path.json``."""
    path = Path(path)
    spec = f.spec
    header = {
        "dim": spec.dim,
        "N": spec.N,
        "L": spec.L,
        "blade_order": [BladeIndex(m).label() for m in range(spec.nblades)],
        "scalar_type": "float64",
        "poly_max_degree": None if f.poly is None else f.poly.max_degree,
        "poly_coeffs": None if f.poly is None else f.poly.coeffs.tolist(),
    }
    f.values.astype("<f8").tofile(path)
    _sidecar(path).write_text(json.dumps(header, sort_keys=True, indent=1), encoding="utf-8")


def read_mvf(path):
    path = Path(path)
    header = json.loads(_sidecar(path).read_text(encoding="utf-8"))
    if header.get("scalar_type") != "float64":
        raise ValueError("unsupported scalar type")
    spec = GridSpec(header["dim"], header["N"], header["L"])
    vals = np.fromfile(path, dtype="<f8")
    expected = spec.N ** spec.dim * spec.nblades
    if vals.size != expected:
        raise ValueError(f"expected {expected} values, found {vals.size}")
    poly = None
    if header.get("poly_coeffs") is not None:
        poly = PolyMultivector(spec.dim, np.array(header["poly_coeffs"]))
    return MultivectorField(spec, vals.reshape(spec.shape + (spec.nblades,)), poly)
