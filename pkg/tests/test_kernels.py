import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirac_beltrami import _kernels
from dirac_beltrami.exterior import contract_matrices, dirac_blocks, wedge_matrices


@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 4), P=st.integers(1, 50))
def test_pointwise_matvec_paths_agree(seed, n, P):
    rng = np.random.default_rng(seed)
    B = 1 << n
    mats = rng.standard_normal((P, B, B))
    vecs = rng.standard_normal((P, B))
    assert np.allclose(_kernels.pointwise_matvec(mats, vecs), _kernels.pointwise_matvec_numpy(mats, vecs),
                       rtol=1e-13, atol=1e-13)


@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 4), P=st.integers(1, 50),
       which=st.sampled_from(["wedge", "contract", "dirac+", "dirac-", "dense"]))
def test_symbol_apply_paths_agree(seed, n, P, which):
    rng = np.random.default_rng(seed)
    B = 1 << n
    blocks = {"wedge": wedge_matrices(n), "contract": contract_matrices(n),
              "dirac+": dirac_blocks(n, 1), "dirac-": dirac_blocks(n, -1),
              "dense": rng.standard_normal((n, B, B))}[which]
    fhat = rng.standard_normal((P, B)) + 1j * rng.standard_normal((P, B))
    xi = rng.standard_normal((n, P))
    xi[:, ::3] = 0.0
    a = _kernels.symbol_apply(fhat, xi, blocks)
    b = _kernels.symbol_apply_numpy(fhat, xi, blocks)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)


def test_env_flag_selects_numpy(monkeypatch):
    monkeypatch.setenv("DIRAC_BELTRAMI_NUMBA", "0")
    assert not _kernels.numba_enabled()
    monkeypatch.setenv("DIRAC_BELTRAMI_NUMBA", "1")
    assert _kernels.numba_enabled() == _kernels.HAVE_NUMBA


def test_solver_identical_across_paths(monkeypatch):
    from dirac_beltrami.grid import GridSpec
    from dirac_beltrami.montel import random_monogenic
    from dirac_beltrami.solver import random_grade_preserving, solve
    s = GridSpec(2, 16)
    rng = np.random.default_rng(0)
    c = random_grade_preserving(s, 0.5, rng, half_width=1.5)
    H = random_monogenic(2, 3, rng)
    monkeypatch.setenv("DIRAC_BELTRAMI_NUMBA", "1")
    F1, r1 = solve(c, H)
    monkeypatch.setenv("DIRAC_BELTRAMI_NUMBA", "0")
    F0, r0 = solve(c, H)
    assert r1.iterations == r0.iterations
    assert np.abs(F1.total() - F0.total()).max() < 1e-12
