"""Neumann-series solver for D- F = M D+ F on the periodic grid.

Given a monogenic polynomial H, the solution is F = H + C G where C is the
periodic Cauchy transform and G solves the fixed point

    G = P0 M (D+ H + S G),

with S the periodic Beurling transform and P0 the projection off the kernel
of the grid D-. S is orthogonal and P0 is an orthogonal projection, so the
map is a contraction with factor at most ``M = max_x ||M(x)||``.
"""
import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .exterior import BladeIndex, grades, is_monogenic
from .grid import (GridSpec, MultivectorField, _fft, _ifft, gradient_sq, l2_norm,
                   sobolev_norm)
from .operators import (apply_dirac, beurling_values, cauchy_values, kernel_part,
                        project_mean_zero_values)

log = logging.getLogger(__name__)

STRUCTURES = ("general", "grade-preserving", "grade1-only")


class CoefficientField:
    """Pointwise linear map M(x) on the exterior algebra with sup operator norm < 1."""

    def __init__(self, spec, matrices, structure="general"):
        B = spec.nblades
        matrices = np.array(matrices, dtype=np.float64)
        if matrices.shape != spec.shape + (B, B):
            raise ValueError(f"matrices must have shape {spec.shape + (B, B)}")
        if structure not in STRUCTURES:
            raise ValueError(f"structure must be one of {STRUCTURES}")
        g = grades(spec.dim)
        if structure == "grade-preserving":
            off = g[:, None] != g[None, :]
            if np.any(matrices[..., off]):
                raise ValueError("grade-preserving coefficient mixes grades")
        elif structure == "grade1-only":
            outside = ~((g[:, None] == 1) & (g[None, :] == 1))
            if np.any(matrices[..., outside]):
                raise ValueError("grade1-only coefficient acts outside grade 1")
        norms = np.linalg.norm(matrices, ord=2, axis=(-2, -1))
        M = float(norms.max(initial=0.0))
        if not M < 1:
            raise ValueError(f"coefficient norm M = {M:.6g} must be < 1")
        matrices.flags.writeable = False
        self.spec = spec
        self.matrices = matrices
        self.structure = structure
        self.node_norms = norms
        self.M = M
        self.support = np.any(matrices != 0, axis=(-2, -1))
        self._flat = matrices.reshape(-1, B, B)

    def __repr__(self):
        return f"CoefficientField(dim={self.spec.dim}, N={self.spec.N}, M={self.M:.4g}, {self.structure})"

    @classmethod
    def zeros(cls, spec):
        return cls(spec, np.zeros(spec.shape + (spec.nblades,) * 2), "grade-preserving")

    @classmethod
    def constant(cls, spec, mat, structure="general"):
        mat = np.asarray(mat, dtype=float)
        return cls(spec, np.broadcast_to(mat, spec.shape + mat.shape), structure)

    @classmethod
    def from_function(cls, spec, fn, structure="general"):
        """``fn(x)`` gets coordinates (n, N, ..., N) and returns (N, ..., N, 2^n, 2^n)."""
        return cls(spec, fn(spec.coords()), structure)

    @classmethod
    def from_grade1(cls, spec, mats):
        """Embed per-node n x n matrices on the grade-1 block, zero elsewhere."""
        n = spec.dim
        mats = np.broadcast_to(np.asarray(mats, dtype=float), spec.shape + (n, n))
        full = np.zeros(spec.shape + (spec.nblades,) * 2)
        idx = np.array([1 << k for k in range(n)])
        full[..., idx[:, None], idx[None, :]] = mats
        return cls(spec, full, "grade1-only")

    def grade1_block(self):
        idx = [1 << k for k in range(self.spec.dim)]
        return self.matrices[..., idx, :][..., idx]

    def apply_values(self, values):
        B = self.spec.nblades
        out = _kernels.pointwise_matvec(self._flat, values.reshape(-1, B))
        return out.reshape(values.shape)

    def apply(self, f):
        if f.spec != self.spec:
            raise ValueError("grid mismatch")
        return MultivectorField(self.spec, self.apply_values(f.total()))

    def support_margin(self):
        """Distance from the support to the box faces (inf if M is zero)."""
        if not self.support.any():
            return np.inf
        x = self.spec.coords()
        reach = np.abs(x[:, self.support]).max()
        return self.spec.L / 2 - reach


def planar_coefficient(spec, mu, support=None):
    """n = 2 coefficient acting on grade 1 as w -> mu * conj(w) under e1, e2 <-> 1, i.

    With F = u + v e12 and f = u - i v this turns D- F = M D+ F into the
    classical d-bar f = mu d f.
    """
    if spec.dim != 2:
        raise ValueError("planar coefficient needs dim = 2")
    p, q = complex(mu).real, complex(mu).imag
    block = np.array([[p, q], [q, -p]])
    mats = np.broadcast_to(block, spec.shape + (2, 2)).copy()
    if support is not None:
        mats = mats * np.asarray(support, dtype=float)[..., None, None]
    return CoefficientField.from_grade1(spec, mats)


def box_indicator(spec, half_width):
    return np.all(np.abs(spec.coords()) < half_width, axis=0)


def random_grade_preserving(spec, M, rng, half_width=None):
    """Random grade-block-diagonal coefficient with max node norm exactly ``M``.

    Supported on ``|x_k| < half_width`` (default: the middle half of each axis).
    """
    if not 0 <= M < 1:
        raise ValueError(f"coefficient norm M = {M:.6g} must be < 1")
    half_width = spec.L / 4 if half_width is None else half_width
    B = spec.nblades
    g = grades(spec.dim)
    mats = np.zeros(spec.shape + (B, B))
    for k in range(spec.dim + 1):
        idx = np.flatnonzero(g == k)
        block = rng.standard_normal(spec.shape + (len(idx), len(idx)))
        mats[..., idx[:, None], idx[None, :]] = block
    mats *= box_indicator(spec, half_width)[..., None, None]
    norms = np.linalg.norm(mats, ord=2, axis=(-2, -1))
    mats *= M / norms.max()
    # rounding can push the max a hair above M
    mats *= min(1.0, M / np.linalg.norm(mats, ord=2, axis=(-2, -1)).max())
    return CoefficientField(spec, mats, "grade-preserving")


def smooth_bump(spec, half_width, center=None):
    """C^infinity bump equal to 1 at the centre and vanishing for |x_k| >= half_width."""
    x = spec.coords()
    if center is not None:
        x = x - np.asarray(center, dtype=float).reshape((-1,) + (1,) * spec.dim)
    r = x / half_width
    out = np.ones(spec.shape)
    for k in range(spec.dim):
        t = r[k] ** 2
        inside = t < 1
        out = out * np.where(inside, np.exp(1 - 1 / np.where(inside, 1 - t, 1.0)), 0.0)
    return out


# ------------------------------------------------------------------ .cff IO

def write_cff(path, coeff):
    path = Path(path)
    spec = coeff.spec
    header = {
        "dim": spec.dim,
        "N": spec.N,
        "L": spec.L,
        "blade_order": [BladeIndex(m).label() for m in range(spec.nblades)],
        "scalar_type": "float64",
        "structure": coeff.structure,
    }
    coeff.matrices.astype("<f8").tofile(path)
    path.with_name(path.name + ".json").write_text(json.dumps(header, sort_keys=True, indent=1),
                                                  encoding="utf-8")


def read_cff(path):
    path = Path(path)
    header = json.loads(path.with_name(path.name + ".json").read_text(encoding="utf-8"))
    spec = GridSpec(header["dim"], header["N"], header["L"])
    raw = np.fromfile(path, dtype="<f8")
    B = spec.nblades
    if raw.size != spec.N ** spec.dim * B * B:
        raise ValueError("coefficient file size does not match its header")
    return CoefficientField(spec, raw.reshape(spec.shape + (B, B)), header.get("structure", "general"))


# ---------------------------------------------------------------- solving

@dataclass
class SolveReport:
    iterations: int
    converged: bool
    M: float
    predicted_rate: float
    increments: list = field(default_factory=list)
    equation_residuals: list = field(default_factory=list)
    projected_residual: float = 0.0
    equation_residual: float = 0.0
    equation_residual_rel: float = 0.0
    mean_defect: float = 0.0
    mean_defect_l2: float = 0.0
    dplus_h_norm: float = 0.0
    tol: float = 0.0
    dealias: bool = False
    wall_clock: float = 0.0
    grid: dict = field(default_factory=dict)

    def increment_ratios(self):
        r = np.asarray(self.increments)
        ok = r[:-1] > 0
        return (r[1:][ok] / r[:-1][ok]).tolist()

    def observed_rate(self):
        ratios = self.increment_ratios()
        return max(ratios) if ratios else 0.0

    def to_dict(self):
        d = asdict(self)
        d["observed_rate"] = self.observed_rate()
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _norm(values, spec):
    return float(np.sqrt(spec.cell_volume * np.sum(values ** 2)))


def _truncate(values, spec):
    vh = _fft(values, spec.dim)
    vh[~spec.dealias_mask()] = 0.0
    return _ifft(vh, spec.dim)


def solve(coeff, H, tol=1e-10, max_iter=200, dealias=False):
    """Solve D- F = M D+ F with F = H + C G; returns (F, SolveReport).

    Stops once the increment is below ``tol`` relative to the iterate and the
    projected equation residual is below ``10 * tol * ||D+ H||``. When
    ``max_iter`` is hit the last iterate is returned with ``converged=False``.
    """
    spec = coeff.spec
    if H.dim != spec.dim:
        raise ValueError("H and the coefficient live in different dimensions")
    if not is_monogenic(H):
        raise ValueError("H is not monogenic: D- H has nonzero coefficients")
    if coeff.support_margin() < spec.L / 8:
        warnings.warn("coefficient support is within L/8 of the box faces; "
                      "periodization error may be large", stacklevel=2)
    t0 = time.perf_counter()
    dph = MultivectorField.from_poly(spec, H.dirac(1)).total()
    dph_norm = _norm(dph, spec)

    def project(v):
        if dealias:
            v = _truncate(v, spec)
        return project_mean_zero_values(v, spec)

    G = project(coeff.apply_values(dph))
    increments, eq_res = [], []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        MW = coeff.apply_values(dph + beurling_values(G, spec))
        G_new = project(MW)
        r = _norm(G_new - G, spec)
        increments.append(r)
        eq_res.append(_norm(G - MW, spec))
        G = G_new
        g_norm = _norm(G, spec)
        if r <= tol * g_norm and r <= 10 * tol * dph_norm:
            converged = True
            break
    if not converged:
        log.warning("Neumann iteration hit max_iter=%d; last increment %.3e", max_iter, increments[-1])

    F = MultivectorField(spec, cauchy_values(G, spec), H)
    MDF = coeff.apply_values(apply_dirac(1, F).total())
    defect_field = kernel_part(MultivectorField(spec, MDF))
    res_abs, res_rel = residual(coeff, F)
    report = SolveReport(
        iterations=it,
        converged=converged,
        M=coeff.M,
        predicted_rate=coeff.M,
        increments=increments,
        equation_residuals=eq_res,
        projected_residual=_norm(G - project(MDF), spec),
        equation_residual=res_abs,
        equation_residual_rel=res_rel,
        mean_defect=float(np.linalg.norm(MDF.reshape(-1, spec.nblades).mean(axis=0))),
        mean_defect_l2=l2_norm(defect_field),
        dplus_h_norm=dph_norm,
        tol=tol,
        dealias=dealias,
        wall_clock=time.perf_counter() - t0,
        grid={"dim": spec.dim, "N": spec.N, "L": spec.L},
    )
    return F, report


def residual(coeff, F):
    """(||D- F - M D+ F||, same divided by ||D+ F||)."""
    if F.spec != coeff.spec:
        raise ValueError("grid mismatch between field and coefficient")
    dm = apply_dirac(-1, F).total()
    dp = apply_dirac(1, F).total()
    r = _norm(dm - coeff.apply_values(dp), F.spec)
    scale = _norm(dp, F.spec)
    return r, (r / scale if scale > 0 else r)


def projected_residual(coeff, F):
    """(||D- F - P0(M D+ F)||, same relative to ||D+ F||): the gauge-fixed equation."""
    if F.spec != coeff.spec:
        raise ValueError("grid mismatch between field and coefficient")
    dm = apply_dirac(-1, F).total()
    dp = apply_dirac(1, F).total()
    r = _norm(dm - project_mean_zero_values(coeff.apply_values(dp), F.spec), F.spec)
    scale = _norm(dp, F.spec)
    return r, (r / scale if scale > 0 else r)


# ------------------------------------------------------------ Caccioppoli

@dataclass
class CaccioppoliReport:
    lhs: float
    rhs: float
    ratio: float
    sobolev_ratio: float
    residual: float
    valid: bool

    def to_dict(self):
        return asdict(self)


def caccioppoli_check(F, sub, coeff=None, gate=1e-6, zero_tol=1e-12):
    """Both sides of the cutoff energy estimate and the W^{1,2}(U) / L^2(V) ratio.

    ``lhs = int phi^2 |grad (x) F|^2`` and ``rhs = int |grad phi|^2 |F|^2``.
    With ``coeff`` given, the relative gauge-fixed residual must be <= ``gate``
    for the report to be valid.
    """
    spec = F.spec
    sub.validate(spec)
    phi = sub.cutoff(spec)
    gphi = sub.cutoff_gradient(spec)
    hv = spec.cell_volume
    lhs = hv * float(np.sum(phi ** 2 * gradient_sq(F)))
    rhs = hv * float(np.sum(np.sum(gphi ** 2, axis=0) * np.sum(F.total() ** 2, axis=-1)))
    if rhs > 0:
        ratio = lhs / rhs
    else:
        ratio = 0.0 if lhs <= zero_tol else np.inf
    l2v = l2_norm(F, sub.outer_mask(spec))
    sob = sobolev_norm(F, sub.inner_mask(spec)) / l2v if l2v > 0 else 0.0
    res = 0.0
    valid = True
    if coeff is not None:
        res = projected_residual(coeff, F)[1]
        valid = res <= gate
    return CaccioppoliReport(lhs, rhs, ratio, sob, res, valid)
