"""Command-line entry points.

Exit codes: 0 success, 2 configuration error, 3 non-convergence,
4 energy-dissipation violation.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from fractions import Fraction

from .functionals import chemical_potential, energy_original
from .harness import convergence_study, dissipation_audit, reference_solution
from .io import read_trace_csv, write_field_snapshot, write_trace_csv
from .problems import BUILTINS, ConfigError, builtin_config, load_config
from .rotating import RotationOptions, angular_momentum, rotating_energy_original
from .solvers import SolverConfig, SolverError, solve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_DISSIPATION = 4


def _number(text: str) -> float:
    """Accept ``0.05``, ``1e-3`` or ``1/20``."""
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _number_list(text: str) -> list[float]:
    return [_number(t) for t in text.split(",") if t.strip()]


def _tag(x: float) -> str:
    return format(x, ".6g")


def _add_problem_args(sp, default_builtin=None):
    src = sp.add_mutually_exclusive_group(required=default_builtin is None)
    src.add_argument("--config", help="YAML run configuration")
    src.add_argument("--builtin", choices=sorted(BUILTINS), default=default_builtin)
    sp.add_argument("--h", type=_number, help="grid spacing (all axes)")
    sp.add_argument("--n", type=int, help="grid points per axis")
    sp.add_argument("--omega", type=_number, help="rotation speed")
    sp.add_argument("--out", default=".", help="output directory")


def _add_solver_args(sp):
    sp.add_argument("--order", type=int, choices=(1, 2))
    sp.add_argument("--tau", type=_number)
    sp.add_argument("--tau0", type=_number)
    sp.add_argument("--tauf", type=_number)
    sp.add_argument("--r", type=_number)
    sp.add_argument("--tol", type=_number)
    sp.add_argument("--n-max", type=int, dest="n_max")
    sp.add_argument("--kappa", help="adaptive | theory | <number>")
    sp.add_argument("--truncate", action="store_true", help="rotating runs: use the truncated nonlinearity")
    sp.add_argument(
        "--effective-potential",
        action="store_true",
        help="rotating runs: use W = V - |R|^2/2 in the update instead of V",
    )


def _problem_config(args):
    cfg = load_config(args.config) if args.config else builtin_config(args.builtin)
    if args.h is not None and args.n is not None:
        raise ConfigError("give --h or --n, not both")
    if args.h is not None:
        grid_n = [int(round((b - a) / args.h)) for a, b in cfg.domain]
        cfg = replace(cfg, grid_n=grid_n)
    if args.n is not None:
        cfg = replace(cfg, grid_n=[args.n] * len(cfg.domain))
    if args.omega is not None:
        cfg = replace(cfg, omega=args.omega)
    return cfg


def _solver_settings(args, base: dict) -> dict:
    s = dict(base)
    if args.tau is not None:
        for k in ("tau0", "tauf", "r"):
            s.pop(k, None)
        s["tau"] = args.tau
    if any(getattr(args, k) is not None for k in ("tau0", "tauf", "r")):
        s.pop("tau", None)
        for k in ("tau0", "tauf", "r"):
            if getattr(args, k) is not None:
                s[k] = getattr(args, k)
    for k in ("order", "tol", "n_max"):
        if getattr(args, k) is not None:
            s[k] = getattr(args, k)
    if args.kappa is not None:
        s["kappa_rule"] = args.kappa
    return s


def _build(args):
    pcfg = _problem_config(args)
    pcfg = replace(pcfg, solver=_solver_settings(args, pcfg.solver))
    p, f0, cfg = pcfg.build()
    return pcfg, p, f0, cfg


def _run_tag(name, cfg: SolverConfig) -> str:
    if cfg.adaptive:
        return f"{name}_{cfg.order}_{_tag(cfg.tau0)}-{_tag(cfg.tauf)}"
    return f"{name}_{cfg.order}_{_tag(cfg.tau)}"


def _rotation(args, p):
    if p.omega == 0 and not (args.truncate or args.effective_potential):
        return None
    return RotationOptions(truncate=args.truncate, effective_potential=args.effective_potential)


def _write_run(args, pcfg, cfg, f, trace):
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.join(args.out, _run_tag(pcfg.name, cfg))
    write_trace_csv(trace, stem + ".csv")
    write_field_snapshot(f, stem + ".gpef")
    return stem


def _finish_run(args, trace, stem):
    print(f"status: {trace.status} after {len(trace)} iterations ({trace.stage_status})")
    print(f"wrote {stem}.csv and {stem}.gpef")
    if args.audit:
        report = dissipation_audit(trace)
        print(report.summary())
        if not report.ok:
            return EXIT_DISSIPATION
    return EXIT_OK if trace.converged else EXIT_NOT_CONVERGED


def cmd_solve(args):
    pcfg, p, f0, cfg = _build(args)
    f, trace = solve(f0, p, cfg, _rotation(args, p))
    stem = _write_run(args, pcfg, cfg, f, trace)
    if p.omega == 0:
        print(f"E = {energy_original(f, p):.15g}  mu = {chemical_potential(f, p):.15g}")
    else:
        print(f"E_rot = {rotating_energy_original(f, p):.15g}")
    return _finish_run(args, trace, stem)


def cmd_rotate(args):
    pcfg, p, f0, cfg = _build(args)
    if p.grid.dim != 2:
        raise ConfigError("rotate needs a 2D problem")
    opts = RotationOptions(truncate=args.truncate, effective_potential=args.effective_potential)
    f, trace = solve(f0, p, cfg, opts)
    stem = _write_run(args, pcfg, cfg, f, trace)
    print(f"E_rot = {rotating_energy_original(f, p):.15g}  <L_z> = {angular_momentum(f):.15g}")
    return _finish_run(args, trace, stem)


def _reference(args, pcfg, p, f0):
    os.makedirs(args.out, exist_ok=True)
    n = "x".join(str(k) for k in p.grid.n)
    suffix = "" if args.extrapolate else "_plain"
    cache = os.path.join(args.out, f"{pcfg.name}_{n}_ref_{_tag(args.ref_tauf)}{suffix}.gpef")
    ref = reference_solution(p, f0, tauf=args.ref_tauf, extrapolate=args.extrapolate, cache=cache)
    return ref, cache


def cmd_reference(args):
    pcfg, p, f0, _ = _build(args)
    ref, path = _reference(args, pcfg, p, f0)
    print(f"E = {energy_original(ref, p):.15g}  mu = {chemical_potential(ref, p):.15g}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_converge(args):
    pcfg, p, f0, cfg = _build(args)
    if (args.taus is None) == (args.hs is None):
        raise ConfigError("give exactly one of --taus or --hs")
    if args.taus is not None:
        kind, sweep = "tau", args.taus
        ref, _ = _reference(args, pcfg, p, f0)
        ref_tau = args.ref_tauf
    else:
        kind, sweep = "h", args.hs
        ref_h = args.ref_h if args.ref_h is not None else min(sweep) / 2
        ref_cfg = replace(pcfg, grid_n=[int(round((b - a) / ref_h)) for a, b in pcfg.domain])
        rp, rf0, _ = ref_cfg.build()
        ref, _ = solve(rf0, rp, cfg)
        ref_tau = cfg.tauf if cfg.adaptive else cfg.tau
    report = convergence_study(
        pcfg, sweep, cfg, ref, kind=kind, reference_tau=ref_tau,
        reference_order=2 if kind == "tau" else cfg.order,
    )
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{pcfg.name}_{cfg.order}_{kind}-sweep.csv")
    report.to_csv(path)
    print(report.format_table())
    print(f"wrote {path}")
    unconverged = [r.param for r in report.rows if r.status != "converged"]
    if unconverged:
        print(f"rows not converged: {unconverged}")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_audit(args):
    try:
        trace = read_trace_csv(args.trace)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read trace: {exc}") from None
    report = dissipation_audit(trace, args.threshold)
    print(report.summary())
    for i, d in report.relaxed_violations:
        print(f"  relaxed increase at row {i} (iter {trace.iters[i]}): {d:.3e}")
    return report.exit_status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relaxgpe", description="Relaxed-energy SLP ground-state solver")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="run one configuration")
    _add_problem_args(sp)
    _add_solver_args(sp)
    sp.add_argument("--audit", action="store_true", help="exit 4 on relaxed-energy increases")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("rotate", help="run a rotating problem")
    _add_problem_args(sp, default_builtin="ex2d_rotating")
    _add_solver_args(sp)
    sp.add_argument("--audit", action="store_true", help="exit 4 on relaxed-energy increases")
    sp.set_defaults(func=cmd_rotate)

    for name, func, helptext in (
        ("converge", cmd_converge, "tau or h convergence table"),
        ("reference", cmd_reference, "build and cache the reference solution"),
    ):
        sp = sub.add_parser(name, help=helptext)
        _add_problem_args(sp)
        _add_solver_args(sp)
        sp.add_argument("--ref-tauf", type=_number, default=1e-3, dest="ref_tauf")
        sp.add_argument("--no-extrapolate", action="store_false", dest="extrapolate")
        if name == "converge":
            sp.add_argument("--taus", type=_number_list, help="comma-separated decreasing tau values")
            sp.add_argument("--hs", type=_number_list, help="comma-separated decreasing grid spacings")
            sp.add_argument("--ref-h", type=_number, dest="ref_h", help="spacing of the self-reference")
        sp.set_defaults(func=func)

    sp = sub.add_parser("audit", help="energy-dissipation report for a trace CSV")
    sp.add_argument("--trace", required=True)
    sp.add_argument("--threshold", type=_number, default=1e-10)
    sp.set_defaults(func=cmd_audit)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
