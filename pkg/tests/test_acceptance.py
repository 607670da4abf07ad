"""Acceptance criteria 1-10, each at its tolerance.

Every test records one PASS/FAIL line that is echoed in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from dirac_beltrami.divform import (cayley, cayley_bound, div_residual, inverse_cayley, layered,
                                    lift, random_normal_2d, random_symmetric, reference_solve)
from dirac_beltrami.exterior import Multivector, PolyMultivector, make_monogenic
from dirac_beltrami.grid import GridSpec, MultivectorField, SubdomainSpec, l2_norm
from dirac_beltrami.identities import operator_checks
from dirac_beltrami.montel import (extract_subsequence, generate_family, random_monogenic,
                                   uniform_caccioppoli)
from dirac_beltrami.operators import apply_dirac, beurling_values, project_mean_zero_values
from dirac_beltrami.oracle import dense_solve
from dirac_beltrami.solver import (CoefficientField, box_indicator, planar_coefficient,
                                   random_grade_preserving, residual, smooth_bump, solve)

from planar import planar_poly, wirtinger

IDENTITY_NAMES = ("D+^2 = Lap", "D-^2 = -Lap", "D-D+ = -D+D-", "D+ skew-adjoint",
                  "D- self-adjoint", "d^2 = 0", "delta^2 = 0")


def bump_coeff(spec, M=0.5, width=1.8):
    D = np.diag(np.where(np.arange(spec.nblades) % 2 == 0, 1.0, -1.0))
    return CoefficientField.from_function(
        spec, lambda x: M * smooth_bump(spec, width)[..., None, None] * D, "grade-preserving")


def vector_h():
    P = PolyMultivector.from_terms(2, [((1, 1), Multivector.basis(2, 1)),
                                       ((2, 0), Multivector.basis(2, 2)),
                                       ((0, 2), -Multivector.basis(2, 2))])
    return make_monogenic(P)


def test_c01_operator_identities(criterion):
    t = time.perf_counter()
    worst = 0.0
    for n, N in ((2, 64), (3, 32)):
        for c in operator_checks(GridSpec(n, N), trials=100, seed=1):
            if c.name.split(" (")[0] in IDENTITY_NAMES:
                worst = max(worst, c.error)
    elapsed = time.perf_counter() - t
    ok = worst < 1e-10 and elapsed < 60
    criterion(1, ok, f"max relative error {worst:.2e} (< 1e-10), {elapsed:.1f} s (< 60 s)")
    assert ok


def test_c02_beurling_unitarity(criterion):
    worst = 0.0
    for n, N in ((2, 32), (3, 16)):
        spec = GridSpec(n, N)
        rng = np.random.default_rng(n)
        for _ in range(100):
            g = rng.standard_normal(spec.shape + (spec.nblades,))
            s = beurling_values(g, spec)
            p0 = project_mean_zero_values(g, spec)
            worst = max(worst, abs(np.linalg.norm(s) / np.linalg.norm(p0) - 1))
    ok = worst < 1e-11
    criterion(2, ok, f"max | ||Sg|| / ||P0 g|| - 1 | = {worst:.2e} (< 1e-11)")
    assert ok


def test_c03_neumann_contraction(criterion):
    spec = GridSpec(2, 32)
    tol = 1e-10
    lines, ok = [], True
    for M in (0.3, 0.6, 0.9):
        c = planar_coefficient(spec, M, box_indicator(spec, 1.6))
        F, rep = solve(c, vector_h(), tol=tol, max_iter=1000)
        ratios = rep.increment_ratios()
        predicted = math.log(tol) / math.log(M)
        good = (rep.converged and max(ratios) <= M + 0.05
                and predicted / 2 <= rep.iterations <= 2 * predicted)
        ok &= good
        lines.append(f"M={M}: max ratio {max(ratios):.3f}, {rep.iterations} its vs {predicted:.0f}")
    criterion(3, ok, "; ".join(lines))
    assert ok


def test_c04_dense_oracle(criterion):
    spec = GridSpec(2, 8)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        c = random_grade_preserving(spec, 0.5, rng, half_width=1.6)
        H = random_monogenic(2, 3, rng)
        F, rep = solve(c, H, tol=1e-13, max_iter=500)
        Fd, _ = dense_solve(c, H)
        worst = max(worst, np.linalg.norm(F.total() - Fd.total()) / np.linalg.norm(Fd.total()))
    ok = worst < 1e-8
    criterion(4, ok, f"max relative difference {worst:.2e} over 20 coefficients (< 1e-8)")
    assert ok


def test_c05_classical_reduction(criterion):
    spec = GridSpec(2, 32)
    ks = [0.1, 0.5] + [0.9 * np.exp(1j * th) for th in np.linspace(0, 2 * np.pi, 7)[:-1]]
    worst_dirac = worst_classical = 0.0
    for k in ks:
        F = MultivectorField.from_poly(spec, planar_poly(k, 1))
        c = planar_coefficient(spec, k)
        r = apply_dirac(-1, F).total() - c.apply_values(apply_dirac(1, F).total())
        worst_dirac = max(worst_dirac, np.abs(r).max())
        df, dbf = wirtinger(F)
        worst_classical = max(worst_classical, np.abs(dbf - k * df).max())
    ok = worst_dirac < 1e-9 and worst_classical < 1e-9
    criterion(5, ok, f"f = z + k conj(z), {len(ks)} values of k: |D-F - M D+F| <= {worst_dirac:.1e}, "
                     f"|dbar f - k d f| <= {worst_classical:.1e} (< 1e-9)")
    assert ok


def test_c06_cayley(criterion):
    rng = np.random.default_rng(6)
    inv_err, margin_sym, max_normal = 0.0, -np.inf, 0.0
    for i in range(100):
        A = random_symmetric(GridSpec(2 + i % 2, 8), rng)
        c = cayley(A)
        inv_err = max(inv_err, np.abs(inverse_cayley(c) - A.A).max())
        margin_sym = max(margin_sym, c.M - cayley_bound(A.lam, A.Lam))
    for _ in range(100):
        A = random_normal_2d(GridSpec(2, 8), rng, lam=0.2, Lam=3.0)
        c = cayley(A)
        inv_err = max(inv_err, np.abs(inverse_cayley(c) - A.A).max())
        max_normal = max(max_normal, c.M)
    ok = inv_err < 1e-12 and margin_sym <= 1e-12 and max_normal < 1
    criterion(6, ok, f"involution error {inv_err:.1e}; symmetric M - bound <= {margin_sym:.1e}; "
                     f"normal max M {max_normal:.4f}")
    assert ok


def test_c07_divform_cross_validation(criterion):
    spec = GridSpec(2, 64)
    A = layered(spec, lambda x1: 2 + np.sin(x1))
    u = reference_solve(A, [1.0, 0.0])
    layer_err = np.abs(u.gradient()[0] - np.sqrt(3.0) / (2 + np.sin(spec.coords()[0]))).max()
    spec = GridSpec(2, 32)
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(20):
        A = random_symmetric(spec, rng) if i % 2 == 0 else random_normal_2d(spec, rng)
        u = reference_solve(A, [1.0, 0.5])
        div_abs, _ = div_residual(u, A)
        bel_abs, _ = residual(cayley(A), lift(u, A))
        worst = max(worst, bel_abs / div_abs)
    ok = layer_err < 1e-6 and worst < 10
    criterion(7, ok, f"layered corrector error {layer_err:.1e} (< 1e-6); "
                     f"max Beltrami/div residual ratio {worst:.2f} (< 10)")
    assert ok


def test_c08_caccioppoli(criterion):
    levels = []
    for N in (32, 64):
        spec = GridSpec(2, N)
        fam = generate_family(bump_coeff(spec), 100, 4, seed=8)
        rep = uniform_caccioppoli(fam, SubdomainSpec.fractions(spec, 0.25, 0.5))
        levels.append((rep.max_cap_ratio, rep.max_sobolev_ratio))
    (c1, s1), (c2, s2) = levels
    fc, fs = max(c1, c2) / min(c1, c2), max(s1, s2) / min(s1, s2)
    ok = all(map(np.isfinite, (c1, c2, s1, s2))) and fc <= 2 and fs <= 2
    criterion(8, ok, f"cutoff ratio {c1:.4f} -> {c2:.4f} (factor {fc:.3f}); "
                     f"W12(U)/L2(V) constant {s1:.4f} -> {s2:.4f} (factor {fs:.3f})")
    assert ok


def test_c09_montel(criterion):
    t = time.perf_counter()
    spec = GridSpec(2, 32)
    fam = generate_family(bump_coeff(spec), 64, 4, seed=0)
    chain, limit, rep = extract_subsequence(fam, SubdomainSpec.fractions(spec, 0.25, 0.5))
    elapsed = time.perf_counter() - t
    worst = max(rep.distances) / fam.bound
    ok = len(chain) >= 8 and worst < 0.1 and rep.limit_residual < 1e-7 and elapsed < 600
    criterion(9, ok, f"chain length {len(chain)} (>= 8), max consecutive distance {worst:.3f} B "
                     f"(< 0.1 B), limit residual {rep.limit_residual:.1e} (< 1e-7), {elapsed:.1f} s")
    assert ok


def test_c10_periodization(criterion):
    rng = np.random.default_rng(10)
    worst = np.inf
    rows = []
    for _ in range(5):
        H = random_monogenic(2, 3, rng)
        spec = GridSpec(2, 32)
        defects = []
        for _ in range(3):
            _, rep = solve(bump_coeff(spec), H, tol=1e-12, max_iter=400)
            defects.append(rep.mean_defect)
            spec = spec.doubled_box()
        factors = [defects[j] / defects[j + 1] for j in range(2)]
        worst = min(worst, *factors)
        rows.append("/".join(f"{d:.2e}" for d in defects))
    ok = worst >= 2
    criterion(10, ok, f"min decrease factor per doubling {worst:.2f} (>= 2); defects {', '.join(rows)}")
    assert ok
