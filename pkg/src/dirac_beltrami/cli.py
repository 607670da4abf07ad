"""Command line front end: ``dirac-beltrami <command> --config FILE``.

Exit codes: 0 success, 1 a verification failed, 2 usage or config error.
Reports are UTF-8 JSON with sorted keys and RFC-4180 CSV; neither contains
timings, so identical inputs give identical bytes.
"""
import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import EXIT_FAILED, EXIT_OK, EXIT_USAGE, ConfigError
from .grid import GridSpec, SubdomainSpec, set_threads, write_mvf

log = logging.getLogger("dirac_beltrami")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- output

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return str(obj)
    return obj


def write_json(path, obj):
    text = json.dumps(_clean(obj), sort_keys=True, indent=1, ensure_ascii=False) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


# ---------------------------------------------------------------- inputs

def _spec(cfg):
    return GridSpec(cfg["dim"], cfg["N"], cfg["L"])


def _bump_diag(spec, M, width):
    from .solver import CoefficientField, smooth_bump
    sign = np.where(np.arange(spec.nblades) % 2 == 0, 1.0, -1.0)
    return CoefficientField.from_function(
        spec, lambda x: M * smooth_bump(spec, width)[..., None, None] * np.diag(sign),
        "grade-preserving")


def build_coefficient(cfg, spec=None):
    """CoefficientField from a .cff file or from the ``coefficient_kind`` recipe."""
    from .solver import CoefficientField, planar_coefficient, random_grade_preserving, read_cff, smooth_bump
    try:
        if cfg["coefficient"]:
            return read_cff(cfg["coefficient"])
        spec = _spec(cfg) if spec is None else spec
        kind = cfg["coefficient_kind"]
        if kind == "zero":
            return CoefficientField.zeros(spec)
        if kind == "bump":
            return _bump_diag(spec, cfg["M"], cfg["support"])
        if kind == "planar":
            return planar_coefficient(spec, cfg["mu"], smooth_bump(spec, cfg["support"]))
        return random_grade_preserving(spec, cfg["M"], np.random.default_rng(cfg["seed"]),
                                       half_width=cfg["support"])
    except (OSError, ValueError) as exc:
        raise UsageError(f"coefficient: {exc}") from None


# ---------------------------------------------------------------- commands

def cmd_verify_identities(cfg, out):
    from .identities import run_suite
    pairs = cfg["grids"] or [cfg["dim"], cfg["N"]]
    grids = list(zip(pairs[::2], pairs[1::2]))
    for n, N in grids:
        if not (1 <= n <= 6 and N >= 4 and N % 2 == 0):
            raise UsageError(f"bad grid ({n}, {N})")
    checks = run_suite(grids=grids, trials=cfg["trials"], seed=cfg["seed"],
                       delta_sign=cfg["delta_sign"], n_max=cfg["n_max"])
    failed = [c.name for c in checks if not c.passed]
    write_json(out / "identities.json", {"config": cfg.to_dict(), "checks": [c.to_dict() for c in checks],
                                         "failed": failed, "passed": not failed})
    for name in failed:
        print(f"FAILED: {name}", file=sys.stderr)
    print(f"{len(checks) - len(failed)}/{len(checks)} identities passed")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_solve(cfg, out):
    from .exterior import is_monogenic
    from .montel import random_monogenic
    from .solver import solve
    coeff = build_coefficient(cfg)
    spec = coeff.spec
    rng = np.random.default_rng(cfg["seed"])
    H = random_monogenic(spec.dim, cfg["h_degree"], rng)
    assert is_monogenic(H)
    F, rep = solve(coeff, H, tol=cfg["tol"], max_iter=cfg["max_iter"], dealias=cfg["dealias"])
    report = rep.to_dict()
    report.pop("wall_clock")
    result = {"config": cfg.to_dict(), "report": report}
    ok = rep.converged
    if cfg["oracle"]:
        if spec.N ** spec.dim * spec.nblades > 4096:
            raise UsageError("the dense oracle is limited to N^n * 2^n <= 4096 unknowns")
        from .oracle import dense_solve
        Fd, _ = dense_solve(coeff, H, dealias=cfg["dealias"])
        diff = np.linalg.norm(F.values - Fd.values) / max(np.linalg.norm(Fd.values), 1e-300)
        result["oracle_relative_difference"] = float(diff)
        ok = ok and diff < 1e-8
    write_mvf(out / "solution.mvf", F)
    write_json(out / "solve_report.json", result)
    print(f"solve: {rep.iterations} iterations, converged={rep.converged}, "
          f"projected residual {rep.projected_residual:.3e}")
    return EXIT_OK if ok else EXIT_FAILED


def _divform_coefficients(cfg, spec):
    from .divform import DivFormCoefficient, layered, random_normal_2d, random_symmetric, read_dfc
    kind = cfg["coefficient_kind"]
    if cfg["coefficient"]:
        return [("file", read_dfc(cfg["coefficient"]), None)]
    if kind == "identity":
        return [("identity", DivFormCoefficient.identity(spec), None)]
    if kind == "layered":
        eps = cfg["layer_amplitude"]
        k = 2 * np.pi / spec.L
        A = layered(spec, lambda x1: 1 + eps * np.sin(k * x1))
        # 1/mean(1/a) for a = 1 + eps sin
        return [("layered", A, math.sqrt(1 - eps ** 2))]
    rng = np.random.default_rng(cfg["seed"])
    make = random_symmetric if kind == "symmetric" else random_normal_2d
    return [(f"{kind}-{i}", make(spec, rng, cfg["lam"], cfg["Lam"]), None)
            for i in range(cfg["instances"])]


def cmd_divform(cfg, out):
    from .divform import cayley, div_residual, lift, reference_solve
    from .solver import residual
    spec = _spec(cfg)
    try:
        coeffs = _divform_coefficients(cfg, spec)
    except (OSError, ValueError) as exc:
        raise UsageError(f"coefficient: {exc}") from None
    header = ["instance", "div_residual", "beltrami_residual", "M", "iterations", "oracle_error"]
    rows, ok = [], True
    for name, A, harmonic_mean in coeffs:
        if not A.normal:
            raise UsageError(f"{name}: coefficient is not normal")
        xi0 = np.zeros(A.spec.dim)
        xi0[0] = 1.0
        if cfg["xi0"] is not None:
            xi0 = np.array(cfg["xi0"])
        stats = {}
        try:
            u = reference_solve(A, xi0, tol=cfg["tol"], maxiter=cfg["max_iter"], stats=stats)
        except RuntimeError as exc:
            log.error("%s: %s", name, exc)
            rows.append([name, float("nan"), float("nan"), float("nan"), cfg["max_iter"], ""])
            ok = False
            continue
        div_abs, _ = div_residual(u, A)
        coeff = cayley(A)
        bel_abs, _ = residual(coeff, lift(u, A))
        err = ""
        if harmonic_mean is not None:
            d1 = u.gradient()[0]
            err = float(np.abs(d1 - harmonic_mean * xi0[0] / A.A[..., 0, 0]).max())
            ok = ok and err < 1e-6
        ok = ok and bel_abs <= 10 * div_abs + 1e-12
        rows.append([name, div_abs, bel_abs, coeff.M, stats.get("iterations", 0), err])
    write_csv(out / "divform.csv", header, rows)
    print(f"divform: {len(rows)} instances, {'all checks passed' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_FAILED


def _family(cfg, coeff):
    from .montel import generate_family
    try:
        return generate_family(coeff, cfg["family_size"], cfg["degree_max"], cfg["seed"], tol=cfg["tol"])
    except RuntimeError as exc:
        raise UsageError(str(exc)) from None


def cmd_montel(cfg, out):
    from .montel import distance_matrix, extract_subsequence, interior_estimate_check, uniform_caccioppoli
    coeff = build_coefficient(cfg)
    spec = coeff.spec
    fam = _family(cfg, coeff)
    sub = SubdomainSpec.fractions(spec, cfg["inner"], cfg["outer"])
    D = distance_matrix(fam, sub)
    sched = None if cfg["eps_schedule"] is None else [e * fam.bound for e in cfg["eps_schedule"]]
    chain, limit, rep = extract_subsequence(fam, sub, sched, dist=D)
    # the limit may depend on U; record what a smaller window picks
    nested = SubdomainSpec.fractions(spec, cfg["inner"] / 2, cfg["outer"])
    chain2, _, rep2 = extract_subsequence(fam, nested, sched)
    agree = None
    if chain and chain2:
        agree = float(D[rep.limit_index, rep2.limit_index])
    interior = interior_estimate_check(fam, sub)
    cacc = uniform_caccioppoli(fam, sub)
    max_cons = max(rep.distances, default=0.0)
    member_res = [m.projected_residual for m in fam.members]
    report = {
        "config": cfg.to_dict(),
        "family_size": len(fam),
        "bound": fam.bound,
        "T_emp": max(float(np.sqrt(spec.cell_volume * np.sum((m.F.total() - m.F.poly_values()) ** 2)))
                     for m in fam.members),
        "max_member_residual": max(member_res),
        "chain": rep.to_dict(),
        "chain_length": len(chain),
        "max_consecutive_distance": max_cons,
        "max_consecutive_distance_over_bound": max_cons / fam.bound if fam.bound else 0.0,
        "nested_window": {"inner": cfg["inner"] / 2, "chain": rep2.to_dict(),
                          "distance_between_limits": agree},
        "interior_estimate": interior.to_dict(),
        "caccioppoli": cacc.to_dict(),
    }
    write_csv(out / "distances.csv", ["member"] + [str(j) for j in range(len(fam))],
              [[i] + list(D[i]) for i in range(len(fam))])
    write_json(out / "montel_report.json", report)
    if limit is not None:
        write_mvf(out / "limit.mvf", limit)
    ok = len(chain) >= cfg["min_chain"] and rep.limit_residual <= cfg["gate"]
    print(f"montel: chain of {len(chain)}, max consecutive distance {max_cons / fam.bound:.3f} B, "
          f"limit residual {rep.limit_residual:.2e}")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_caccioppoli(cfg, out):
    from .montel import uniform_caccioppoli
    if cfg["refine"] and cfg["coefficient"]:
        raise UsageError("refinement needs a coefficient recipe, not a coefficient file")
    coeff = build_coefficient(cfg)
    specs = [coeff.spec] + ([coeff.spec.refined()] if cfg["refine"] else [])
    levels = []
    for spec in specs:
        c = coeff if spec == coeff.spec else build_coefficient(cfg, spec)
        fam = _family(cfg, c)
        sub = SubdomainSpec.fractions(spec, cfg["inner"], cfg["outer"])
        rep = uniform_caccioppoli(fam, sub)
        levels.append({"N": spec.N, "max_cap_ratio": rep.max_cap_ratio,
                       "max_sobolev_ratio": rep.max_sobolev_ratio,
                       "max_member_residual": max(m.projected_residual for m in fam.members)})
    finite = all(math.isfinite(lv["max_cap_ratio"]) and math.isfinite(lv["max_sobolev_ratio"])
                 for lv in levels)
    report = {"config": cfg.to_dict(), "levels": levels, "finite": finite}
    ok = finite
    if len(levels) == 2:
        a, b = levels
        f_cap = max(a["max_cap_ratio"], b["max_cap_ratio"]) / min(a["max_cap_ratio"], b["max_cap_ratio"])
        f_sob = max(a["max_sobolev_ratio"], b["max_sobolev_ratio"]) / min(a["max_sobolev_ratio"],
                                                                          b["max_sobolev_ratio"])
        report["refinement_factor_cap"] = f_cap
        report["refinement_factor_sobolev"] = f_sob
        ok = ok and f_cap <= 2 and f_sob <= 2
    write_json(out / "caccioppoli_report.json", report)
    print("caccioppoli: " + ", ".join(f"N={lv['N']} ratio {lv['max_cap_ratio']:.4g}" for lv in levels))
    return EXIT_OK if ok else EXIT_FAILED


COMMANDS = {
    "verify-identities": cmd_verify_identities,
    "solve": cmd_solve,
    "divform": cmd_divform,
    "montel": cmd_montel,
    "caccioppoli": cmd_caccioppoli,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--out", help="output directory (default: config 'out' or .)")
    common.add_argument("--threads", type=int, help="FFT worker threads (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="dirac-beltrami", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = cfgmod.load(args.command, args.config)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            cfg.values["threads"] = args.threads
        out = Path(args.out or cfg["out"] or ".")
        out.mkdir(parents=True, exist_ok=True)
        set_threads(cfg["threads"])
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
