"""Hodge-Dirac operators and their inverses as Fourier multipliers.

On a mode ``exp(i xi.x)`` the exterior derivative acts as ``i xi ^`` and the
interior derivative as ``i xi _|``, so

    D+  <->  i (xi ^ + xi _|),      D-  <->  i (xi ^ - xi _|).

``(xi ^ - xi _|)^2 = -|xi|^2``, hence the symbol of D- squares to ``|xi|^2``
and its inverse on a nonzero mode is the same symbol divided by ``|xi|^2``.
Modes where every derivative multiplier vanishes (the mean, plus pure Nyquist
modes) form the kernel of the grid D-; every inverse maps them to zero.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exterior import contract_matrices, dirac_blocks, symbol_matrix, wedge_matrices
from .grid import MultivectorField, _fft, _ifft


def _flat_xi(spec):
    return spec.xi().reshape(spec.dim, -1)


def _apply_first_order(values, spec, blocks):
    """Periodic values -> ifft(i * sum_k xi_k blocks[k] @ fft(values))."""
    B = spec.nblades
    fhat = _fft(values, spec.dim).reshape(-1, B)
    out = 1j * _kernels.symbol_apply(fhat, _flat_xi(spec), blocks)
    return _ifft(out.reshape(spec.shape + (B,)), spec.dim)


def _first_order(f, blocks, poly_op):
    vals = _apply_first_order(f.values, f.spec, blocks)
    poly = None if f.poly is None else poly_op(f.poly)
    return MultivectorField(f.spec, vals, poly)


def apply_d(f):
    return _first_order(f, wedge_matrices(f.spec.dim), lambda p: p.d())


def apply_delta(f):
    return _first_order(f, contract_matrices(f.spec.dim), lambda p: p.delta())


def apply_dirac(sign, f):
    if sign not in (1, -1, "+", "-"):
        raise ValueError("sign must be +1 or -1")
    sign = {"+": 1, "-": -1}.get(sign, sign)
    return _first_order(f, dirac_blocks(f.spec.dim, sign), lambda p: p.dirac(sign))


def laplacian(f):
    spec = f.spec
    xi2 = np.sum(spec.xi() ** 2, axis=0)[..., None]
    vals = _ifft(-xi2 * _fft(f.values, spec.dim), spec.dim)
    poly = None if f.poly is None else f.poly.laplacian()
    return MultivectorField(spec, vals, poly)


def _require_periodic(g):
    if g.poly is not None and not g.poly.is_zero():
        raise ValueError("inverse operators act on periodic fields only")


def _inv_xi2(spec):
    xi2 = np.sum(spec.xi() ** 2, axis=0)
    with np.errstate(divide="ignore"):
        inv = np.where(xi2 > 0, 1.0 / np.where(xi2 > 0, xi2, 1.0), 0.0)
    return inv


def project_mean_zero_values(values, spec):
    ghat = _fft(values, spec.dim)
    ghat[spec.kernel_mask()] = 0.0
    return _ifft(ghat, spec.dim)


def project_mean_zero(g):
    """Remove the kernel modes of the grid D- (the mean and the pure Nyquist modes)."""
    _require_periodic(g)
    return MultivectorField(g.spec, project_mean_zero_values(g.values, g.spec))


def kernel_part(g):
    """The component of ``g`` removed by ``project_mean_zero``."""
    _require_periodic(g)
    return MultivectorField(g.spec, g.values - project_mean_zero_values(g.values, g.spec))


def cauchy_values(values, spec):
    B = spec.nblades
    ghat = _fft(values, spec.dim).reshape(-1, B)
    out = 1j * _kernels.symbol_apply(ghat, _flat_xi(spec), dirac_blocks(spec.dim, -1))
    out *= _inv_xi2(spec).reshape(-1, 1)
    return _ifft(out.reshape(spec.shape + (B,)), spec.dim)


def beurling_values(values, spec):
    B = spec.nblades
    xi = _flat_xi(spec)
    ghat = _fft(values, spec.dim).reshape(-1, B)
    # i m+ (i m- g) / |xi|^2
    t = _kernels.symbol_apply(ghat, xi, dirac_blocks(spec.dim, -1))
    out = -_kernels.symbol_apply(t, xi, dirac_blocks(spec.dim, 1))
    out *= _inv_xi2(spec).reshape(-1, 1)
    return _ifft(out.reshape(spec.shape + (B,)), spec.dim)


def cauchy_transform(g):
    """Inverse of D- on the complement of its kernel; kernel modes map to zero."""
    _require_periodic(g)
    return MultivectorField(g.spec, cauchy_values(g.values, g.spec))


def beurling_transform(g):
    """D+ composed with the inverse of D-; orthogonal on the complement of the kernel."""
    _require_periodic(g)
    return MultivectorField(g.spec, beurling_values(g.values, g.spec))


def inverse_laplacian(g):
    """Mean-zero solution of Lap u = g - (kernel part of g)."""
    _require_periodic(g)
    spec = g.spec
    ghat = _fft(g.values, spec.dim)
    return MultivectorField(spec, _ifft(-_inv_xi2(spec)[..., None] * ghat, spec.dim))


# ------------------------------------------------------ per-mode symbols

def _sigma(xi, sign):
    return 1j * symbol_matrix(xi, sign)


def _xi2(xi):
    return float(np.dot(xi, xi))


SYMBOLS = {
    "d": lambda xi: 1j * np.tensordot(np.asarray(xi, float), wedge_matrices(len(xi)), axes=1),
    "delta": lambda xi: 1j * np.tensordot(np.asarray(xi, float), contract_matrices(len(xi)), axes=1),
    "dirac+": lambda xi: _sigma(xi, 1),
    "dirac-": lambda xi: _sigma(xi, -1),
    "laplacian": lambda xi: -_xi2(xi) * np.eye(1 << len(xi)),
    "cauchy": lambda xi: _sigma(xi, -1) / _xi2(xi) if _xi2(xi) else np.zeros((1 << len(xi),) * 2),
    "beurling": lambda xi: (_sigma(xi, 1) @ _sigma(xi, -1)) / _xi2(xi) if _xi2(xi)
    else np.zeros((1 << len(xi),) * 2),
}

_APPLY = {
    "d": apply_d,
    "delta": apply_delta,
    "dirac+": lambda f: apply_dirac(1, f),
    "dirac-": lambda f: apply_dirac(-1, f),
    "laplacian": laplacian,
    "cauchy": cauchy_transform,
    "beurling": beurling_transform,
}

_FLAGS = {
    "d": frozenset(),
    "delta": frozenset(),
    "dirac+": frozenset({"annihilates-mean", "skew-adjoint"}),
    "dirac-": frozenset({"annihilates-mean", "self-adjoint"}),
    "laplacian": frozenset({"annihilates-mean", "self-adjoint"}),
    "cauchy": frozenset({"annihilates-mean", "self-adjoint"}),
    "beurling": frozenset({"annihilates-mean", "unitary"}),
}


@dataclass(frozen=True)
class SpectralOperator:
    """A Fourier multiplier: per-mode symbol rule plus a fast grid application."""

    name: str
    dim: int

    def __post_init__(self):
        if self.name not in SYMBOLS:
            raise ValueError(f"unknown operator {self.name!r}")

    @property
    def flags(self):
        return _FLAGS[self.name]

    def symbol(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.dim,):
            raise ValueError("frequency has the wrong dimension")
        return SYMBOLS[self.name](xi)

    def __call__(self, f):
        if f.spec.dim != self.dim:
            raise ValueError("dimension mismatch")
        return _APPLY[self.name](f)
