"""Command-line frontend.

Subcommands: point, sweep, populations, trajectory, workdist, scf-trace.
All physical inputs are dimensionless ratios (U/J, tau*J, kT/J); the hopping
J is the unit of energy.  A JSON config file can predefine any flag; explicit
flags win.  Exit codes: 0 ok, 2 bad arguments, 3 numerical failure under
--strict, 4 I/O trouble.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .dynamics import TimeGrid
from .model import SIGN_CONVENTIONS, DomainError, DriveParams, hamiltonian
from .protocols import (
    ConvergenceError,
    ProtocolKind,
    run_protocol,
    run_with_auto_steps,
)
from .sweep import (
    SweepGrid,
    SweepSettings,
    run_sweep,
    sweep_csv_lines,
)
from .thermo import thermal_state
from .work import jarzynski_residual

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--U", type=float, default=2.0, help="interaction strength U/J")
    sub.add_argument("--tauJ", type=float, default=10.0, help="evolution time tau*J")
    sub.add_argument("--kT", type=float, default=2.0, help="temperature kT/J")
    sub.add_argument("--A0", type=float, default=1.0, help="static drive amplitude A0/J")
    sub.add_argument("--Atau", type=float, default=7.0, help="drive amplitude Atau/J")
    sub.add_argument(
        "--protocol",
        choices=[k.value for k in ProtocolKind],
        default="exact",
        help="which pipeline computes the point",
    )
    sub.add_argument("--M", type=int, default=None, help="time steps (default: policy max(1000, 2000*tauJ))")
    sub.add_argument("--auto-dt", action="store_true", help="double M until n1(tau) is stable to 1e-7")
    sub.add_argument(
        "--sign-convention",
        choices=list(SIGN_CONVENTIONS),
        default="narrative",
        help="narrative: site 2 attractive; literal-eq5: mirrored",
    )
    sub.add_argument("--plda-density", choices=["scf", "exact"], default="scf", help="t=0 density for frozen functionals")
    sub.add_argument("--mixing", type=float, default=1.0, help="ALDA density mixing in (0,1]; 1 = plain iteration")
    sub.add_argument("--max-iter", type=int, default=200, help="ALDA iteration cap")
    sub.add_argument("--scf-tol", type=float, default=1e-5, help="ALDA time-averaged density tolerance")
    sub.add_argument("--out", type=str, default=None, help="output CSV path (default: stdout)")
    sub.add_argument("--config", type=str, default=None, help="JSON file with flag defaults")
    sub.add_argument("--strict", action="store_true", help="exit 3 when a self-consistent cycle fails to converge")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dimerwork", description=__doc__.strip().splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    p_point = subs.add_parser("point", help="W, n1(tau) and Jarzynski residual at one parameter point")
    _add_common(p_point)

    p_sweep = subs.add_parser("sweep", help="protocol x (U, tau) x kT grid to CSV")
    _add_common(p_sweep)
    p_sweep.add_argument("--protocols", nargs="+", choices=[k.value for k in ProtocolKind], default=None,
                         help="protocols to sweep (default: --protocol)")
    p_sweep.add_argument("--U-min", type=float, default=0.0)
    p_sweep.add_argument("--U-max", type=float, default=10.0)
    p_sweep.add_argument("--U-points", type=int, default=40)
    p_sweep.add_argument("--tau-min", type=float, default=0.1)
    p_sweep.add_argument("--tau-max", type=float, default=10.0)
    p_sweep.add_argument("--tau-points", type=int, default=40)
    p_sweep.add_argument("--kT-values", type=float, nargs="+", default=[0.2, 2.0, 20.0])
    p_sweep.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p_sweep.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-reproducible output")

    p_pop = subs.add_parser("populations", help="thermal populations p_n of H(t=0) over a kT range")
    _add_common(p_pop)
    p_pop.add_argument("--kT-min", type=float, default=0.01)
    p_pop.add_argument("--kT-max", type=float, default=100.0)
    p_pop.add_argument("--kT-points", type=int, default=121)

    p_traj = subs.add_parser("trajectory", help="site occupations n_j(t) along the drive")
    _add_common(p_traj)

    p_wd = subs.add_parser("workdist", help="two-point-measurement work distribution P(w)")
    _add_common(p_wd)

    p_scf = subs.add_parser("scf-trace", help="ALDA residual per iteration")
    _add_common(p_scf)
    p_scf.add_argument("--densities-out", type=str, default=None,
                       help="also dump per-iteration n1(t) curves (long CSV: iteration,t,n1)")

    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", type=str, default=None)
    known, _ = probe.parse_known_args(argv[1:] if argv and not argv[0].startswith("-") else argv)
    args = parser.parse_args(argv)
    if known.config:
        try:
            with open(known.config, encoding="utf-8") as fh:
                defaults = json.load(fh)
        except OSError as exc:
            parser.exit(EXIT_IO, f"cannot read config: {exc}\n")
        except json.JSONDecodeError as exc:
            parser.exit(EXIT_USAGE, f"bad JSON config: {exc}\n")
        explicit = _explicit_flags(argv)
        for key, value in defaults.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                parser.exit(EXIT_USAGE, f"unknown config key: {key}\n")
            if attr not in explicit:
                setattr(args, attr, value)
    return args


def _explicit_flags(argv: list[str]) -> set[str]:
    out = set()
    for tok in argv:
        if tok.startswith("--"):
            out.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    return out


def _drive(args) -> DriveParams:
    return DriveParams(
        tau=args.tauJ,
        U=args.U,
        A0=args.A0,
        Atau=args.Atau,
        sign_convention=args.sign_convention,
    )


def _grid(args) -> TimeGrid | None:
    return TimeGrid(args.tauJ, args.M) if args.M is not None else None


def _run_point(args):
    kind = ProtocolKind(args.protocol)
    kwargs = dict(
        plda_density_source=args.plda_density,
        alda_tol=args.scf_tol,
        alda_max_iter=args.max_iter,
        alda_mixing=args.mixing,
    )
    if args.auto_dt:
        return run_with_auto_steps(kind, _drive(args), args.kT, **kwargs)
    return run_protocol(kind, _drive(args), args.kT, grid=_grid(args), **kwargs)


def _emit(lines, args):
    text = "\n".join(lines) + "\n"
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def cmd_point(args) -> int:
    res = _run_point(args)
    scf_iters = res.scf.iterations if res.scf else 0
    converged = res.scf.converged if res.scf else True
    residual = jarzynski_residual(res.distribution)
    csv_lines = [
        "protocol,kT_over_J,U_over_J,tauJ,W_over_J,n1_tau,n2_tau,scf_iterations,converged,jarzynski_residual",
        ",".join(
            [
                args.protocol,
                _fmt(args.kT),
                _fmt(args.U),
                _fmt(args.tauJ),
                _fmt(res.work),
                _fmt(float(res.trajectory.n1[-1])),
                _fmt(float(res.trajectory.n2[-1])),
                str(scf_iters),
                "true" if converged else "false",
                _fmt(residual),
            ]
        ),
    ]
    summary = [
        f"W/J = {res.work:.9g}  (extracted work, positive = energy drawn from the system)",
        f"n1(tau) = {res.trajectory.n1[-1]:.9g}, n2(tau) = {res.trajectory.n2[-1]:.9g}",
        f"jarzynski residual = {residual:.3e}",
    ]
    if res.scf:
        summary.append(f"scf iterations = {scf_iters} (converged: {converged})")
    code = _emit(csv_lines, args)
    if code != EXIT_OK:
        return code
    print("\n".join(summary), file=sys.stdout if args.out else sys.stderr)
    if args.strict and not converged:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_sweep(args) -> int:
    protocols = args.protocols if args.protocols else [args.protocol]
    grid = SweepGrid(
        U_values=tuple(np.linspace(args.U_min, args.U_max, args.U_points)),
        tau_values=tuple(np.linspace(args.tau_min, args.tau_max, args.tau_points)),
        kT_values=tuple(args.kT_values),
        protocols=tuple(ProtocolKind(p) for p in protocols),
    )
    settings = SweepSettings(
        A0=args.A0,
        Atau=args.Atau,
        sign_convention=args.sign_convention,
        M=args.M,
        plda_density_source=args.plda_density,
        alda_tol=args.scf_tol,
        alda_max_iter=args.max_iter,
        alda_mixing=args.mixing,
    )
    result = run_sweep(grid, workers=args.workers, settings=settings)
    timing = "zero" if args.no_timing else "live"
    code = _emit(list(sweep_csv_lines(result, timing)), args)
    if code != EXIT_OK:
        return code
    if args.strict and any(not r.converged for r in result.rows):
        print("unconverged points present", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_populations(args) -> int:
    from .model import external_potential

    p = _drive(args)
    h0 = hamiltonian(p, external_potential(0.0, p))
    kts = np.geomspace(args.kT_min, args.kT_max, args.kT_points)
    lines = ["kT_over_J,p0,p1,p2,p3"]
    for kt in kts:
        pops = thermal_state(h0, float(kt)).populations
        lines.append(",".join([_fmt(float(kt))] + [_fmt(float(x)) for x in pops]))
    return _emit(lines, args)


def cmd_trajectory(args) -> int:
    res = _run_point(args)
    lines = ["t,n1,n2"]
    for t, n1, n2 in zip(res.trajectory.times, res.trajectory.n1, res.trajectory.n2):
        lines.append(f"{_fmt(float(t))},{_fmt(float(n1))},{_fmt(float(n2))}")
    return _emit(lines, args)


def cmd_workdist(args) -> int:
    res = _run_point(args)
    lines = ["w_over_J,probability"]
    for w, prob in zip(res.distribution.w, res.distribution.prob):
        lines.append(f"{_fmt(float(w))},{_fmt(float(prob))}")
    return _emit(lines, args)


def cmd_scf_trace(args) -> int:
    from .protocols import alda_run

    res = alda_run(
        _drive(args),
        args.kT,
        grid=_grid(args),
        tol=args.scf_tol,
        max_iter=args.max_iter,
        mixing=args.mixing,
        record_iterates=bool(args.densities_out),
    )
    lines = ["iteration,residual"]
    for k, r in enumerate(res.scf.residual_history, start=1):
        lines.append(f"{k},{_fmt(r)}")
    code = _emit(lines, args)
    if code != EXIT_OK:
        return code
    if args.densities_out:
        times = res.trajectory.times
        try:
            with open(args.densities_out, "w", encoding="utf-8") as fh:
                fh.write("iteration,t,n1\n")
                for k, n1 in enumerate(res.scf.iterate_densities, start=1):
                    for t, v in zip(times, n1):
                        fh.write(f"{k},{_fmt(float(t))},{_fmt(float(v))}\n")
        except OSError as exc:
            print(f"cannot write {args.densities_out}: {exc}", file=sys.stderr)
            return EXIT_IO
    if args.strict and not res.scf.converged:
        return EXIT_NUMERICAL
    return EXIT_OK


_COMMANDS = {
    "point": cmd_point,
    "sweep": cmd_sweep,
    "populations": cmd_populations,
    "trajectory": cmd_trajectory,
    "workdist": cmd_workdist,
    "scf-trace": cmd_scf_trace,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = _apply_config(parser, list(sys.argv[1:] if argv is None else argv))
    try:
        return _COMMANDS[args.command](args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
