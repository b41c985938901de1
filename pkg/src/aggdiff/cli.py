"""Command-line entry point: ``aggdiff run|audit|steady|fit|plot|validate``.

Exit codes: 0 ok, 2 invalid configuration or input, 3 numerical failure,
4 certificate or audit failure.  Relative output directories are placed
under $AGGDIFF_OUTPUT_ROOT (default: the working directory).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import (CertificateError, ConfigError, ConsistencyError, ConstructionError,
                     ConvergenceError, CurveDomainError, DomainError, DomainEscapeError,
                     StabilityError)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_CERTIFICATE = 0, 2, 3, 4

NUMERIC_ERRORS = (StabilityError, DomainEscapeError, ConvergenceError, ConsistencyError,
                  CurveDomainError, FloatingPointError)
VALIDATION_ERRORS = (ConfigError, DomainError, ConstructionError, FileNotFoundError,
                     json.JSONDecodeError)


def _load(path):
    from .experiment import ExperimentConfig

    return ExperimentConfig.from_file(path)


def _dump(obj) -> str:
    from .experiment import _json_default

    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def cmd_run(args) -> int:
    from .experiment import certificates_passed, run_experiment

    cfg = _load(args.config)
    out = run_experiment(cfg, args.out, plots=not args.no_plots)
    ok = certificates_passed(out)
    print(f"{out}: certificates {'passed' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_CERTIFICATE


def cmd_audit(args) -> int:
    from .experiment import audit_lemmas, resolve_output

    cfg = _load(args.config)
    seeds = range(args.seed_start, args.seed_start + args.seeds)
    report = audit_lemmas(cfg, seeds, only=args.only, config_path=args.config)
    out = resolve_output(cfg, args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "audit.json").write_text(_dump(report) + "\n")
    for name, r in report["lemmas"].items():
        tag = "vacuous" if r["all_vacuous"] else ("ok" if r["failed"] == 0 else "FAIL")
        print(f"{name:16s} {r['statement']:28s} pass={r['passed']:4d} fail={r['failed']:4d} "
              f"vacuous={r['vacuous']:4d}  {tag}")
        for cmd in r["reproduce"]:
            print(f"    reproduce: {cmd}")
    return EXIT_OK if report["ok"] else EXIT_CERTIFICATE


def cmd_steady(args) -> int:
    from .experiment import resolve_output
    from .steady import compute_steady, euler_lagrange_spread, write_steady

    cfg = _load(args.config)
    grid, spec = cfg.make_grid(), cfg.make_potential()
    ss = compute_steady(args.mass, spec, float(cfg.m), args.tol, grid, args.method)
    out = resolve_output(cfg, args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_steady(ss, out / "steady.csv", out / "steady.json")
    print(f"E_inf = {ss.energy.total:.12g}  residual = {ss.residual:.3e}  "
          f"EL spread = {euler_lagrange_spread(ss, spec, float(cfg.m)):.3e}")
    return EXIT_OK


def cmd_fit(args) -> int:
    from .experiment import fit_rate
    from .solver import read_energy_csv

    d = Path(args.dir)
    with open(d / "manifest.json") as fh:
        man = json.load(fh)
    e = read_energy_csv(d / "trajectory" / "energy.csv")
    fit = fit_rate((e["t"], e["total"]), man["E_infty"], man["gamma"], args.window)
    (d / "rate_fit.json").write_text(_dump(fit.to_dict()) + "\n")
    print(_dump(fit.to_dict()))
    return EXIT_OK if fit.bound_holds else EXIT_CERTIFICATE


def cmd_plot(args) -> int:
    from .plots import emit_plots

    files = emit_plots(args.dir)
    print("\n".join(files) if files else "no plots written")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .potential import validate_assumptions

    cfg = _load(args.config)
    rep = validate_assumptions(cfg.make_potential(), cfg.make_grid(), float(cfg.m))
    print(_dump(rep.to_dict()))
    if rep.passed or cfg.override_assumptions:
        return EXIT_OK
    print(f"assumptions failing: {', '.join(rep.failed())}", file=sys.stderr)
    return EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aggdiff", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="simulate and write an artifact directory")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("audit", help="lemma checks over seeded random densities")
    p.add_argument("config")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--only", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("steady", help="compute the steady state for the config")
    p.add_argument("config")
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--method", choices=("fixed_point", "gradient_flow"), default="fixed_point")
    p.add_argument("--out")
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("fit", help="refit the equilibration rate of a run")
    p.add_argument("dir")
    p.add_argument("--window", type=float, default=0.5)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("plot", help="emit plot scripts and SVG charts for a run")
    p.add_argument("dir")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("validate", help="check the config and the potential assumptions")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CertificateError as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except VALIDATION_ERRORS as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
