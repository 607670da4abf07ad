"""Planar helpers shared by the solver and acceptance tests."""
from math import comb

import numpy as np

from dirac_beltrami.exterior import PolyMultivector
from dirac_beltrami.grid import MultivectorField, partial


def planar_poly(k, p):
    """F = u + v e12 for f = u - i v = (z + k conj(z))^p, as an exact polynomial."""
    a, b = 1 + k, 1j * (1 - k)  # z + k conj(z) = a x + b y
    c = np.zeros((4, p + 1, p + 1))
    for j in range(p + 1):
        w = comb(p, j) * a ** j * b ** (p - j)
        c[0, j, p - j] += w.real
        c[3, j, p - j] -= w.imag
    return PolyMultivector(2, c)


def wirtinger(F):
    """(d f, dbar f) for f = u - i v, from grid partials of F = u + v e12."""
    fx = partial(F, 0).total()
    fy = partial(F, 1).total()
    cx = fx[..., 0] - 1j * fx[..., 3]
    cy = fy[..., 0] - 1j * fy[..., 3]
    return 0.5 * (cx - 1j * cy), 0.5 * (cx + 1j * cy)


def as_field(spec, P):
    return MultivectorField.from_poly(spec, P)
