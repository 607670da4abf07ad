"""Families of solutions: uniform bounds and convergent subsequences.

Families are built from random monogenic polynomials H of bounded degree,
pushed through the Neumann solver. Bounded sets in that finite-dimensional
space are precompact, so subsequence extraction either succeeds or fails
for a reason that can be inspected.
"""
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .exterior import PolyMultivector, harmonic_basis, make_monogenic
from .grid import MultivectorField, l2_norm, partial, sobolev_norm
from .solver import caccioppoli_check, projected_residual, solve

log = logging.getLogger(__name__)


@dataclass
class FamilyMember:
    H: PolyMultivector
    F: MultivectorField
    report: object
    l2: float
    projected_residual: float


@dataclass
class SolutionFamily:
    coeff: object
    members: list
    seed: int
    degree_max: int
    bound: float = field(init=False)

    def __post_init__(self):
        self.bound = max((m.l2 for m in self.members), default=0.0)

    def __len__(self):
        return len(self.members)

    @property
    def fields(self):
        return [m.F for m in self.members]


def _orthonormal_harmonics(n, degree):
    basis = harmonic_basis(n, degree).reshape(-1, (degree + 1) ** n).astype(float)
    # Gram-Schmidt in coefficient space
    q, _ = np.linalg.qr(basis.T)
    return q.T


def random_monogenic(n, degree, rng, basis=None):
    """H = (d - delta) P with every blade component of P a random harmonic polynomial."""
    basis = _orthonormal_harmonics(n, degree) if basis is None else basis
    B = 1 << n
    g = rng.standard_normal((B, basis.shape[0]))
    coeffs = (g @ basis).reshape((B,) + (degree + 1,) * n)
    return make_monogenic(PolyMultivector(n, coeffs))


def member_from_h(coeff, H, normalize=True, tol=1e-11, max_iter=400):
    spec = coeff.spec
    if normalize:
        nrm = l2_norm(MultivectorField.from_poly(spec, H))
        if nrm == 0:
            raise ValueError("H vanishes on the grid")
        H = H * (1.0 / nrm)
    F, rep = solve(coeff, H, tol=tol, max_iter=max_iter)
    if not rep.converged:
        raise RuntimeError("solver failed to converge for a family member")
    return FamilyMember(H, F, rep, l2_norm(F), projected_residual(coeff, F)[1])


def generate_family(coeff, count, degree_max, seed, normalize=True, tol=1e-11):
    """Solutions F_j = (I + T) H_j for ``count`` random monogenic H_j.

    Members are drawn sequentially from one generator, so a larger ``count``
    with the same seed extends the smaller family.
    """
    n = coeff.spec.dim
    rng = np.random.default_rng(seed)
    basis = _orthonormal_harmonics(n, degree_max)
    members = []
    for _ in range(count):
        H = random_monogenic(n, degree_max, rng, basis)
        members.append(member_from_h(coeff, H, normalize, tol))
    return SolutionFamily(coeff, members, seed, degree_max)


def family_from_polys(coeff, Hs, normalize=False, tol=1e-11):
    members = [member_from_h(coeff, H, normalize, tol) for H in Hs]
    degree = max(H.max_degree for H in Hs) + 1
    return SolutionFamily(coeff, members, seed=-1, degree_max=degree)


# ------------------------------------------------------------ interior estimate

@dataclass
class InteriorReport:
    ratios: list
    c2_norms: list
    l1_norms: list

    @property
    def max_ratio(self):
        return max(self.ratios, default=0.0)

    def to_dict(self):
        return {"ratios": self.ratios, "c2_norms": self.c2_norms, "l1_norms": self.l1_norms,
                "max_ratio": self.max_ratio}


def _multi_indices(n, order):
    for total in range(order + 1):
        for alpha in itertools.product(range(total + 1), repeat=n):
            if sum(alpha) == total:
                yield alpha


def interior_estimate_check(family, sub, order=2):
    """max_{|a|<=order} sup_K |d^a H| / ||H||_{L1(U)} per member; K = inner box, U = outer box."""
    spec = family.coeff.spec
    K = sub.inner_mask(spec)
    U = sub.outer_mask(spec)
    ratios, c2, l1 = [], [], []
    for m in family.members:
        H = m.H
        sup = 0.0
        for alpha in _multi_indices(spec.dim, order):
            P = H
            for k, a in enumerate(alpha):
                for _ in range(a):
                    P = P.partial(k)
            vals = P.evaluate_axes([spec.axis()] * spec.dim)
            sup = max(sup, float(np.sqrt(np.sum(vals ** 2, axis=-1))[K].max()))
        vals = H.evaluate_axes([spec.axis()] * spec.dim)
        l1n = spec.cell_volume * float(np.sum(np.sqrt(np.sum(vals ** 2, axis=-1))[U]))
        c2.append(sup)
        l1.append(l1n)
        ratios.append(sup / l1n if l1n > 0 else 0.0)
    return InteriorReport(ratios, c2, l1)


# ------------------------------------------------------------ subsequences

def _stack_w12(F, mask):
    spec = F.spec
    parts = [F.total()[mask]]
    for k in range(spec.dim):
        parts.append(partial(F, k).total()[mask])
    return np.sqrt(spec.cell_volume) * np.concatenate([p.ravel() for p in parts])


def distance_matrix(family, sub):
    """Pairwise W^{1,2}(U) distances with U the inner box of ``sub``."""
    mask = sub.inner_mask(family.coeff.spec)
    X = np.stack([_stack_w12(m.F, mask) for m in family.members])
    return squareform(pdist(X))


@dataclass
class ChainReport:
    chain: list
    distances: list
    levels: list
    bound: float
    limit_index: int
    limit_residual: float
    found: bool

    def to_dict(self):
        return {"chain": self.chain, "distances": self.distances, "levels": self.levels,
                "bound": self.bound, "limit_index": self.limit_index,
                "limit_residual": self.limit_residual, "found": self.found}


def default_schedule(bound, levels=5):
    return [bound * 2.0 ** -m for m in range(1, levels + 1)]


def _refine(D, n_members, schedule, min_size):
    active = list(range(n_members))
    levels = []
    for eps in schedule:
        best = None
        for c in active:
            ball = [j for j in active if D[c, j] <= eps / 2]
            if best is None or len(ball) > len(best):
                best = ball
        if len(best) < min_size:
            break
        active = sorted(best)
        levels.append({"eps": eps, "size": len(active)})
    return active, levels


def extract_subsequence(family, sub, eps_schedule=None, dist=None, min_size=8):
    """Refine to ever smaller balls and return the surviving indices in order.

    At each radius eps the active set is replaced by the largest ball of
    radius eps/2 around one of its members (ties go to the lowest index), so
    all pairwise distances inside are at most eps. Refinement stops before a
    ball would drop below ``min_size`` members; if not even the first radius
    keeps that many, it is retried with 3. The chain is the final ball sorted
    by index and its last member is the limit candidate.
    """
    if len(family) < 8:
        raise ValueError("subsequence extraction needs at least 8 members")
    D = distance_matrix(family, sub) if dist is None else dist
    B = family.bound
    schedule = default_schedule(B) if eps_schedule is None else list(eps_schedule)
    active, levels = _refine(D, len(family), schedule, min_size)
    if not levels and min_size > 3:
        active, levels = _refine(D, len(family), schedule, 3)
    found = bool(levels)
    chain = active if found else []
    dists = [float(D[a, b]) for a, b in zip(chain, chain[1:])]
    limit = chain[-1] if chain else -1
    res = projected_residual(family.coeff, family.members[limit].F)[1] if chain else float("nan")
    if not found:
        log.info("no chain of length >= 3 at eps=%.3g", schedule[0] if schedule else float("nan"))
    return chain, (family.members[limit].F if chain else None), ChainReport(
        chain, dists, levels, B, limit, res, found)


# ------------------------------------------------------------ Caccioppoli

@dataclass
class UniformCaccioppoliReport:
    cap_ratios: list
    sobolev_ratios: list

    @property
    def max_cap_ratio(self):
        return max(self.cap_ratios, default=0.0)

    @property
    def max_sobolev_ratio(self):
        return max(self.sobolev_ratios, default=0.0)

    def to_dict(self):
        return {"cap_ratios": self.cap_ratios, "sobolev_ratios": self.sobolev_ratios,
                "max_cap_ratio": self.max_cap_ratio, "max_sobolev_ratio": self.max_sobolev_ratio}


def uniform_caccioppoli(family, sub):
    """Per-member cutoff energy ratios and ||F||_{W12(U)} / ||F||_{L2(V)}."""
    cap, sob = [], []
    for m in family.members:
        rep = caccioppoli_check(m.F, sub)
        cap.append(rep.ratio)
        sob.append(rep.sobolev_ratio)
    return UniformCaccioppoliReport(cap, sob)


def sobolev_ratio(F, sub):
    spec = F.spec
    return sobolev_norm(F, sub.inner_mask(spec)) / l2_norm(F, sub.outer_mask(spec))
