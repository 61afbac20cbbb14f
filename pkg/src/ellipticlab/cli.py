"""Batch command-line interface.

Every subcommand is deterministic given its flags; numeric output does not
depend on the thread count.  Exit codes: 0 pass, 1 experiment assertion
failure, 2 usage/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import harness
from .bumps import TestFunction
from .dyson import (
    DysonConvergenceError,
    EllipseRegion,
    EllipticParam,
    SpectralPoint,
    b_from_v,
    m_matrix,
    solve_dyson,
    v_equation_residual,
)
from .ensemble import EnsembleSpec, moment_self_test, sample, save_matrix
from .harness import EtaRule, ExperimentGrid
from .potential import log_potential
from .quad2d import QuadratureError
from .spectral import SingularHermitizationError, decompose, default_probes, hermitize, resolvent_functionals
from .stability import stability_analysis

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_EXPERIMENT_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def parse_complex(text: str) -> complex:
    """Parse 'a+bi' / 'a-bi' (scientific notation allowed) into a complex."""
    cleaned = text.strip().replace(" ", "").replace("i", "j").replace("I", "j")
    try:
        return complex(cleaned)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse complex number {text!r}") from exc


def _out_dir(args) -> Path:
    base = args.out_dir or os.environ.get("ELLIPTICLAB_OUT", ".")
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_report(report, out: Path, fmt: str) -> None:
    report.write_jsonl(out / f"{report.name}.jsonl")
    report.write_summary(out / f"{report.name}.summary.json")
    if fmt == "csv":
        rows = [r.to_dict() for r in report.records]
        keys = sorted({k for row in rows for k in row})
        with open(out / f"{report.name}.csv", "w", encoding="utf-8") as fh:
            fh.write(",".join(keys) + "\n")
            for row in rows:
                fh.write(",".join(json.dumps(row.get(k, "")) for k in keys) + "\n")


def cmd_solve_dyson(args) -> int:
    point = SpectralPoint(zeta=args.zeta, eta=args.eta)
    param = EllipticParam(rho=args.rho)
    sol = solve_dyson(point, param, tol=args.tol)
    m = m_matrix(sol)
    m_inv = np.linalg.inv(m)
    s_m = np.array([[m[1, 1], param.rho * m[1, 0]],
                    [param.rho * m[0, 1], m[0, 0]]])
    z2 = np.array([[1j * sol.eta, sol.zeta], [np.conj(sol.zeta), 1j * sol.eta]])
    out = {
        "v": sol.v,
        "b_re": sol.b.real,
        "b_im": sol.b.imag,
        "iterations": sol.iterations,
        "residual_mde": float(np.max(np.abs(m_inv + z2 + s_m))),
        "residual_abs_m": abs(sol.norm_m_sq - sol.v / (sol.eta + sol.v)),
        "residual_b_eq": abs(-np.conj(sol.b) - sol.norm_m_sq * (sol.zeta + param.rho * sol.b)),
        "residual_v_eq": abs(v_equation_residual(sol.v, point, param)),
        "b_from_v_agrees": abs(b_from_v(sol.v, point, param) - sol.b),
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_stability(args) -> int:
    report = stability_analysis(SpectralPoint(args.zeta, args.eta),
                                EllipticParam(args.rho))
    print(json.dumps({
        "s_spectrum": list(report.s_spectrum),
        "gap": report.gap,
        "inv_norm": report.inv_norm,
        "bound_rhs": report.bound_rhs,
        "v": report.solution.v,
    }, indent=2))
    return EXIT_OK


def cmd_log_potential(args) -> int:
    val = log_potential(args.zeta, EllipticParam(args.rho), quad_tol=args.quad_tol)
    print(json.dumps({"zeta": str(args.zeta), "rho": args.rho, "L": val}, indent=2))
    return EXIT_OK


def cmd_density(args) -> int:
    region = EllipseRegion(args.rho)
    ax, ay = region.semi_axes
    xs = np.linspace(-ax - 0.2, ax + 0.2, args.resolution)
    ys = np.linspace(-ay - 0.2, ay + 0.2, args.resolution)
    sigma = 1.0 / (np.pi * (1.0 - args.rho ** 2))
    out = _out_dir(args) / (args.out or "density.csv")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("x,y,sigma\n")
        for x in xs:
            vals = np.where(region.contains(x + 1j * ys), sigma, 0.0)
            for y, val in zip(ys, vals):
                fh.write(f"{float(x)!r},{float(y)!r},{float(val)!r}\n")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_sample(args) -> int:
    spec = EnsembleSpec(n=args.n, rho=args.rho, mu=args.mu, base=args.base,
                        seed=args.seed)
    mat = sample(spec, trial=args.trial)
    out = _out_dir(args) / (args.out or "matrix.bin")
    save_matrix(mat, out)
    print(f"wrote {out}")
    if args.n >= 100:
        rep = moment_self_test(mat)
        print(json.dumps({
            "mean_offdiag": [rep.mean_offdiag.real, rep.mean_offdiag.imag],
            "var_offdiag": rep.var_offdiag,
            "cov_pair": [rep.cov_pair.real, rep.cov_pair.imag],
            "pseudo_cov": [rep.pseudo_cov.real, rep.pseudo_cov.imag],
            "conj_cov": [rep.conj_cov.real, rep.conj_cov.imag],
            "ok": rep.ok,
        }, indent=2))
        if not rep.ok:
            return EXIT_EXPERIMENT_FAILED
    return EXIT_OK


def cmd_spectrum(args) -> int:
    spec = EnsembleSpec(n=args.n, rho=args.rho, mu=args.mu, base=args.base,
                        seed=args.seed)
    out = _out_dir(args)
    decs, rows = [], []
    probes = None
    for trial in range(args.trials):
        mat = sample(spec, trial)
        for zeta in args.zeta:
            dec = decompose(hermitize(mat, zeta))
            decs.append((trial, dec))
            if probes is None:
                pr = default_probes(2 * args.n, seed=spec.seed, k=2)
                probes = [(f"{a}|{b}", pa, pb) for (a, pa), (b, pb) in
                          zip(pr[:3], pr[1:4])]
            for eta in args.eta:
                rows.append((trial, zeta, eta,
                             resolvent_functionals(dec, eta, probes)))
    harness.dump_eigenvalues(out / f"{args.prefix}.eigenvalues.csv", decs)
    harness.dump_functionals(out / f"{args.prefix}.functionals.jsonl", rows)
    print(f"wrote {out / args.prefix}.eigenvalues.csv and .functionals.jsonl")
    return EXIT_OK


def _grid_from_args(args) -> ExperimentGrid:
    return ExperimentGrid(
        n_values=tuple(args.n), zeta=args.zeta,
        eta_rule=EtaRule(beta=args.beta), trials=args.trials, delta=args.delta,
        seed=args.seed, rho=args.rho, mu=args.mu, base=args.base)


def _finish(report, args) -> int:
    _write_report(report, _out_dir(args), args.format)
    print(json.dumps({"experiment": report.name, "summary": report.summary},
                     indent=2, default=str))
    return EXIT_OK if report.passed else EXIT_EXPERIMENT_FAILED


def cmd_local_law(args) -> int:
    return _finish(harness.averaged_local_law(_grid_from_args(args),
                                              threads=args.threads), args)


def cmd_iso_law(args) -> int:
    return _finish(harness.isotropic_local_law(_grid_from_args(args),
                                               threads=args.threads), args)


def cmd_deloc(args) -> int:
    spec = EnsembleSpec(n=args.n[0], rho=args.rho, mu=args.mu, base=args.base,
                        seed=args.seed)
    return _finish(harness.delocalisation_test(spec, delta=args.delta,
                                               trials=args.trials,
                                               threads=args.threads), args)


def cmd_linstats(args) -> int:
    tf = TestFunction(kind=args.kind, center=args.zeta, alpha=args.alpha)
    return _finish(harness.linear_statistics(_grid_from_args(args), tf,
                                             threads=args.threads), args)


def cmd_girko(args) -> int:
    spec = EnsembleSpec(n=args.n[0], rho=args.rho, mu=args.mu, base=args.base,
                        seed=args.seed)
    mat = sample(spec, trial=0)
    tf = TestFunction(kind=args.kind, center=args.zeta, radius=args.radius)
    discrepancy = harness.girko_consistency(mat, tf, quad_tol=args.quad_tol)
    ok = discrepancy <= args.gate
    print(json.dumps({"discrepancy": discrepancy, "gate": args.gate, "passed": ok},
                     indent=2))
    return EXIT_OK if ok else EXIT_EXPERIMENT_FAILED


def cmd_mc_check(args) -> int:
    region = EllipseRegion(args.rho, args.delta)
    rng = np.random.Generator(np.random.Philox(key=[args.seed, 7]))
    violations = 0
    for _ in range(args.reps):
        est, bound = harness.monte_carlo_estimate(lambda z: z.real, region,
                                                  args.m, args.mc_delta, rng)
        if abs(est) > bound:
            violations += 1
    freq = violations / args.reps
    ok = freq <= args.mc_delta
    print(json.dumps({"violation_frequency": freq, "delta": args.mc_delta,
                      "reps": args.reps, "passed": ok}, indent=2))
    return EXIT_OK if ok else EXIT_EXPERIMENT_FAILED


def cmd_ssv_scan(args) -> int:
    return _finish(harness.small_singular_scan(_grid_from_args(args),
                                               threads=args.threads), args)


def cmd_experiment(args) -> int:
    path = Path(args.config)
    if not path.exists():
        bundled = resources.files("ellipticlab").joinpath("configs", path.name)
        if bundled.is_file():
            cfg = json.loads(bundled.read_text())
        else:
            print(f"config not found: {args.config}", file=sys.stderr)
            return EXIT_USAGE
    else:
        cfg = json.loads(path.read_text())

    if cfg.get("schema") != SCHEMA_VERSION:
        print(f"unsupported config schema {cfg.get('schema')!r}", file=sys.stderr)
        return EXIT_USAGE
    ens = cfg["ensemble"]
    grid_cfg = cfg["grid"]
    seed = args.seed if args.seed is not None else ens.get("seed", 0)
    grid = ExperimentGrid(
        n_values=tuple(grid_cfg["n_values"]),
        zeta=parse_complex(grid_cfg["zeta"]),
        eta_rule=EtaRule(beta=grid_cfg.get("beta", 0.75)),
        trials=grid_cfg.get("trials", 3),
        delta=grid_cfg.get("delta", 0.1),
        seed=seed, rho=ens["rho"], mu=ens.get("mu", 1.0),
        base=ens.get("base", "gaussian"))
    out = Path(cfg.get("output_dir", args.out_dir
                       or os.environ.get("ELLIPTICLAB_OUT", ".")))
    out.mkdir(parents=True, exist_ok=True)

    failed = []
    for name in cfg.get("experiments", []):
        if name == "local-law":
            rep = harness.averaged_local_law(grid, threads=args.threads)
        elif name == "iso-law":
            rep = harness.isotropic_local_law(grid, threads=args.threads)
        elif name == "deloc":
            rep = harness.delocalisation_test(grid.ensemble_spec(grid.n_values[0]),
                                              delta=max(grid.delta, 0.1),
                                              trials=grid.trials,
                                              threads=args.threads)
        elif name == "linstats":
            tf = TestFunction(center=grid.zeta, alpha=cfg.get("alpha", 0.25))
            rep = harness.linear_statistics(grid, tf, threads=args.threads)
        elif name == "ssv-scan":
            rep = harness.small_singular_scan(grid, threads=args.threads)
        elif name == "error-matrix":
            rep = harness.error_matrix_experiment(grid, threads=args.threads)
        elif name == "girko-check":
            spec = EnsembleSpec(n=cfg.get("girko_n", 16), rho=grid.rho,
                                mu=grid.mu, base=grid.base, seed=seed)
            disc = harness.girko_consistency(sample(spec, 0),
                                             TestFunction(center=grid.zeta,
                                                          radius=0.5))
            ok = disc <= cfg.get("girko_gate", 1e-3)
            print(json.dumps({"experiment": "girko-check",
                              "discrepancy": disc, "passed": ok}))
            if not ok:
                failed.append(name)
            continue
        elif name == "mc-check":
            rng = np.random.Generator(np.random.Philox(key=[seed, 11]))
            region = EllipseRegion(grid.rho, grid.delta)
            reps = cfg.get("mc_reps", 200)
            bad = sum(1 for _ in range(reps)
                      if (lambda eb: abs(eb[0]) > eb[1])(
                          harness.monte_carlo_estimate(lambda z: z.real, region,
                                                       100, 0.1, rng)))
            ok = bad / reps <= 0.1
            print(json.dumps({"experiment": "mc-check",
                              "violation_frequency": bad / reps, "passed": ok}))
            if not ok:
                failed.append(name)
            continue
        elif name == "density":
            dm = harness.density_map(grid.ensemble_spec(grid.n_values[0]))
            dm.write_csv(out / "density_map.csv")
            print(json.dumps({"experiment": "density",
                              "mass_inside": dm.mass_inside}))
            continue
        else:
            print(f"unknown experiment {name!r}", file=sys.stderr)
            return EXIT_USAGE
        _write_report(rep, out, args.format)
        print(json.dumps({"experiment": rep.name, "passed": rep.passed,
                          "summary": rep.summary}, default=str))
        if not rep.passed:
            failed.append(name)
    if failed:
        print(f"FAILED: {', '.join(failed)}", file=sys.stderr)
        return EXIT_EXPERIMENT_FAILED
    return EXIT_OK


def _add_common(p, grid: bool = False) -> None:
    p.add_argument("--out-dir", default=None,
                   help="output directory (default: $ELLIPTICLAB_OUT or '.')")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--seed", type=int, default=1)
    if grid:
        p.add_argument("--n", type=int, nargs="+", default=[256])
        p.add_argument("--zeta", type=parse_complex, default=parse_complex("0.3+0.2i"))
        p.add_argument("--beta", type=float, default=0.75)
        p.add_argument("--trials", type=int, default=3)
        p.add_argument("--delta", type=float, default=0.1)
        p.add_argument("--rho", type=float, default=0.5)
        p.add_argument("--mu", type=float, default=1.0)
        p.add_argument("--base", choices=("gaussian", "rademacher-mixture"),
                       default="gaussian")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ellipticlab",
        description="Elliptic ensemble numerics: Dyson equation, Hermitization "
                    "resolvents, local-law experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-dyson", help="solve the 2x2 Dyson equation")
    p.add_argument("--zeta", type=parse_complex, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_solve_dyson)

    p = sub.add_parser("stability", help="stability operator analysis")
    p.add_argument("--zeta", type=parse_complex, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("log-potential", help="log-potential L(zeta)")
    p.add_argument("--zeta", type=parse_complex, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--quad-tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_log_potential)

    p = sub.add_parser("density", help="CSV field of the ellipse density")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--resolution", type=int, default=101)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("sample", help="sample a matrix, dump it, self-test moments")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--base", choices=("gaussian", "rademacher-mixture"),
                   default="gaussian")
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("spectrum", help="eigenvalue and functional dumps")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--base", choices=("gaussian", "rademacher-mixture"),
                   default="gaussian")
    p.add_argument("--zeta", type=parse_complex, nargs="+", required=True)
    p.add_argument("--eta", type=float, nargs="+", required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--prefix", default="spectrum")
    _add_common(p)
    p.set_defaults(func=cmd_spectrum)

    for name, func, extra in (
            ("local-law", cmd_local_law, None),
            ("iso-law", cmd_iso_law, None),
            ("ssv-scan", cmd_ssv_scan, None),
            ("deloc", cmd_deloc, None),
            ("linstats", cmd_linstats, "linstats"),
    ):
        p = sub.add_parser(name, help=f"{name} experiment")
        _add_common(p, grid=True)
        if extra == "linstats":
            p.add_argument("--alpha", type=float, default=0.25)
            p.add_argument("--kind", choices=("polynomial-bump", "gaussian-bump"),
                           default="polynomial-bump")
        p.set_defaults(func=func)

    p = sub.add_parser("girko-check", help="Girko identity at small n")
    _add_common(p, grid=True)
    p.add_argument("--radius", type=float, default=0.5)
    p.add_argument("--kind", choices=("polynomial-bump", "gaussian-bump"),
                   default="polynomial-bump")
    p.add_argument("--quad-tol", type=float, default=1e-4)
    p.add_argument("--gate", type=float, default=1e-3)
    p.set_defaults(func=cmd_girko)

    p = sub.add_parser("mc-check", help="Monte Carlo deviation-bound coverage")
    _add_common(p)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--mc-delta", type=float, default=0.1)
    p.add_argument("--reps", type=int, default=1000)
    p.set_defaults(func=cmd_mc_check)

    p = sub.add_parser("experiment", help="run experiments from a JSON config")
    p.add_argument("config")
    _add_common(p)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DysonConvergenceError, SingularHermitizationError, QuadratureError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
