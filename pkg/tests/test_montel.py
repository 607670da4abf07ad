import itertools

import numpy as np
import pytest

from dirac_beltrami.exterior import Multivector, PolyMultivector, is_monogenic, make_monogenic
from dirac_beltrami.grid import GridSpec, MultivectorField, SubdomainSpec, l2_norm
from dirac_beltrami.montel import (SolutionFamily, distance_matrix, extract_subsequence,
                                   family_from_polys, generate_family, interior_estimate_check,
                                   random_monogenic, uniform_caccioppoli)
from dirac_beltrami.solver import CoefficientField, smooth_bump

S = GridSpec(2, 32)
SUB = SubdomainSpec.fractions(S, 0.25, 0.5)


def bump_coeff(M=0.5):
    D = np.diag([1.0, -1.0, 1.0, -1.0])
    return CoefficientField.from_function(S, lambda x: M * smooth_bump(S, 1.8)[..., None, None] * D,
                                          "grade-preserving")


@pytest.fixture(scope="module")
def family():
    return generate_family(bump_coeff(), 16, 4, seed=5)


def test_random_monogenic_is_monogenic(rng):
    for n in (2, 3):
        assert is_monogenic(random_monogenic(n, 3, rng))


def test_single_member_family():
    H = make_monogenic(PolyMultivector.from_terms(2, [((1, 1), Multivector.scalar(2))]))
    fam = family_from_polys(bump_coeff(), [H])
    assert len(fam) == 1
    assert fam.members[0].projected_residual < 1e-8


def test_zero_coefficient_family_has_unit_norms():
    fam = generate_family(CoefficientField.zeros(S), 6, 3, seed=0)
    for m in fam.members:
        assert np.allclose(m.F.total(), m.F.poly_values())
        assert m.l2 == pytest.approx(1.0, rel=1e-12)
    assert fam.bound == pytest.approx(1.0)


def test_family_is_deterministic_and_extends(family):
    small = generate_family(bump_coeff(), 8, 4, seed=5)
    for a, b in zip(small.members, family.members):
        assert np.array_equal(a.F.total(), b.F.total())
    assert all(m.projected_residual < 1e-8 for m in family.members)
    assert family.bound == max(m.l2 for m in family.members)


def test_distance_is_a_metric(family):
    D = distance_matrix(family, SUB)
    assert np.allclose(D, D.T, atol=0) and np.all(np.diag(D) == 0)
    for i, j, k in itertools.combinations(range(len(family)), 3):
        assert D[i, k] <= D[i, j] + D[j, k] + 1e-10


def test_constant_family_gives_full_chain(family):
    m = family.members[0]
    fam = SolutionFamily(family.coeff, [m] * 10, 0, 4)
    chain, limit, rep = extract_subsequence(fam, SUB)
    assert chain == list(range(10))
    assert rep.distances == [0.0] * 9
    assert rep.found and rep.limit_residual < 1e-8


def test_scaled_family_chain_distances_decrease():
    H0 = random_monogenic(2, 3, np.random.default_rng(3))
    fam = family_from_polys(bump_coeff(), [H0 * (1 + 1 / j) for j in range(1, 17)])
    chain, _, rep = extract_subsequence(fam, SUB)
    assert len(chain) >= 8
    d = rep.distances
    assert all(b < a for a, b in zip(d, d[1:]))
    # linearity: d(j, k) = |1/j - 1/k| * ||F0||
    D = distance_matrix(fam, SUB)
    unit = D[0, 1] / (1 - 1 / 2)
    assert D[3, 7] == pytest.approx(unit * (1 / 4 - 1 / 8), rel=1e-9)


def test_extract_needs_eight_members(family):
    small = SolutionFamily(family.coeff, family.members[:7], 0, 4)
    with pytest.raises(ValueError):
        extract_subsequence(small, SUB)


def test_interior_estimate_constant_and_scaling(family):
    c = PolyMultivector.constant(Multivector.scalar(2, 2.0))
    fam = family_from_polys(CoefficientField.zeros(S), [c])
    rep = interior_estimate_check(fam, SUB)
    U = SUB.outer_mask(S).sum() * S.cell_volume
    assert rep.max_ratio == pytest.approx(1 / U, rel=1e-12)
    Hs = [m.H for m in family.members[:4]]
    a = interior_estimate_check(family_from_polys(family.coeff, Hs), SUB)
    b = interior_estimate_check(family_from_polys(family.coeff, [H * 10.0 for H in Hs]), SUB)
    assert np.allclose(a.ratios, b.ratios, rtol=1e-12)
    assert np.isfinite(a.max_ratio)


def test_uniform_caccioppoli_homogeneous(family):
    rep = uniform_caccioppoli(family, SUB)
    assert np.isfinite(rep.max_cap_ratio) and np.isfinite(rep.max_sobolev_ratio)
    scaled = SolutionFamily(family.coeff, family.members[:3], 0, 4)
    for m in scaled.members:
        m10 = type(m)(m.H * 10.0, m.F * 10.0, m.report, m.l2 * 10, m.projected_residual)
        r1 = uniform_caccioppoli(SolutionFamily(family.coeff, [m], 0, 4), SUB)
        r2 = uniform_caccioppoli(SolutionFamily(family.coeff, [m10], 0, 4), SUB)
        assert r2.cap_ratios[0] == pytest.approx(r1.cap_ratios[0], rel=1e-12)


def test_constant_solution_sobolev_ratio():
    F = MultivectorField.constant(S, Multivector.scalar(2))
    from dirac_beltrami.montel import sobolev_ratio
    expected = np.sqrt(SUB.inner_mask(S).sum() / SUB.outer_mask(S).sum())
    assert sobolev_ratio(F, SUB) == pytest.approx(expected)
