"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Also times one full solve with each path, toggling DIRAC_BELTRAMI_NUMBA.
"""
import argparse
import os
import timeit

import numpy as np

from dirac_beltrami import _kernels
from dirac_beltrami.exterior import dirac_blocks
from dirac_beltrami.grid import GridSpec
from dirac_beltrami.montel import random_monogenic
from dirac_beltrami.solver import random_grade_preserving, solve


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def with_flag(value, fn):
    old = os.environ.get("DIRAC_BELTRAMI_NUMBA")
    os.environ["DIRAC_BELTRAMI_NUMBA"] = value
    try:
        return fn()
    finally:
        if old is None:
            del os.environ["DIRAC_BELTRAMI_NUMBA"]
        else:
            os.environ["DIRAC_BELTRAMI_NUMBA"] = old


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"numba available: {_kernels.HAVE_NUMBA}")
    print(f"{'case':<34}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}{'max diff':>11}")
    for n, N in ((2, 64), (3, 32), (2, 256)):
        spec = GridSpec(n, N)
        P, B = N ** n, spec.nblades
        mats = rng.standard_normal((P, B, B))
        vecs = rng.standard_normal((P, B))
        fhat = rng.standard_normal((P, B)) + 1j * rng.standard_normal((P, B))
        xi = spec.xi().reshape(n, -1)
        blocks = dirac_blocks(n, 1)
        cases = [
            (f"pointwise_matvec n={n} N={N}", lambda: _kernels.pointwise_matvec(mats, vecs),
             lambda: _kernels.pointwise_matvec_numpy(mats, vecs)),
            (f"symbol_apply n={n} N={N}", lambda: _kernels.symbol_apply(fhat, xi, blocks),
             lambda: _kernels.symbol_apply_numpy(fhat, xi, blocks)),
        ]
        for name, fast, slow in cases:
            fast()  # compile
            diff = np.abs(fast() - slow()).max()
            tf, ts = best(fast, args.repeat), best(slow, args.repeat)
            print(f"{name:<34}{1e3 * tf:>10.3f}{1e3 * ts:>10.3f}{ts / tf:>9.2f}{diff:>11.2e}")

    spec = GridSpec(2, 64)
    coeff = random_grade_preserving(spec, 0.6, rng)
    H = random_monogenic(2, 3, rng)
    run = lambda: solve(coeff, H, tol=1e-10)[1].iterations  # noqa: E731
    with_flag("1", run)
    tf = with_flag("1", lambda: best(run, 3))
    ts = with_flag("0", lambda: best(run, 3))
    print(f"{'solve n=2 N=64 M=0.6':<34}{1e3 * tf:>10.1f}{1e3 * ts:>10.1f}{ts / tf:>9.2f}")


if __name__ == "__main__":
    main()
