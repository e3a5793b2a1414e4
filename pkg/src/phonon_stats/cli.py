"""phonon-stats command line.

Subcommands: steady, sweep, figure {fig1a,fig1b,fig1c,fig2}, oracle-check.
All physical inputs are ratios to the spontaneous emission rate gamma.
Exit codes: 0 success, 1 usage error, 2 solver error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import hierarchy, oracle
from .model import Mode, ParameterError, thermal_occupation
from .sweep import (
    RECIPES,
    Axis,
    PointConfig,
    SweepSpec,
    default_jobs,
    run_oracle_check,
    run_point,
    run_sweep,
    write_csv,
)

log = logging.getLogger("phonon_stats")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VALIDATION = 0, 1, 2, 3
DEFAULT_GAMMA_SI = 1e9

# flag dest -> PointConfig field
_POINT_FLAGS = {
    "two_omega": "two_omega",
    "detuning_ratio": "detuning_ratio",
    "kappa": "kappa",
    "g": "g",
    "omega_ph": "omega_ph",
    "gamma_c": "gamma_c",
    "tol": "tol",
    "n_start": "n_start",
    "n_cap": "n_cap",
    "closure": "closure",
    "solver": "solver",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _point_flags(p: argparse.ArgumentParser) -> None:
    d = PointConfig()
    g = p.add_argument_group("parameters (ratios to gamma; defaults reproduce the fig1 recipes)")
    g.add_argument("--two-omega", type=float, help=f"2*Omega/gamma (default {d.two_omega:g})")
    g.add_argument("--detuning-ratio", type=float, help=f"Delta/(2*Omega) (default {d.detuning_ratio:g})")
    g.add_argument("--kappa", type=float, help=f"kappa/gamma (default {d.kappa:g})")
    g.add_argument("--nbar", type=float, help=f"mean thermal phonon number (default {d.nbar:g}); wins over --temperature")
    g.add_argument("--temperature", type=float, help="bath temperature in K; nbar from Bose-Einstein")
    g.add_argument(
        "--gamma-si",
        type=float,
        help=f"gamma in s^-1, used only to convert --temperature (default {DEFAULT_GAMMA_SI:g}, a free choice)",
    )
    g.add_argument("--g", type=float, help=f"g/gamma (default {d.g:g})")
    g.add_argument("--omega-ph", type=float, help=f"omega_ph/gamma (default {d.omega_ph:g})")
    g.add_argument("--gamma-c", type=float, help=f"gamma_c/gamma (default {d.gamma_c:g})")

    s = p.add_argument_group("solver")
    s.add_argument("--mode", choices=("secular", "beyond", "both"), help="default: both")
    s.add_argument("--tol", type=float, help=f"truncation convergence tolerance (default {d.tol:g})")
    s.add_argument("--n-start", type=int, help=f"first N_max tried (default {d.n_start})")
    s.add_argument("--n-cap", type=int, help=f"largest N_max allowed (default {d.n_cap})")
    s.add_argument("--closure", choices=("fock", "hard"), help="top-level closure of the hierarchy (default fock)")
    s.add_argument("--solver", choices=("direct", "iterative"), help="sparse LU or ILU-GMRES (default direct)")
    p.add_argument("--config", type=Path, help="key=value file; command-line flags override it")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="CSV output path (default stdout)")
    p.add_argument("--svg", type=Path, nargs="?", const=True, help="also write an SVG plot (default: <out>.svg)")
    p.add_argument("--jobs", type=int, help="worker processes (default $PHONON_STATS_JOBS or CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phonon-stats", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("steady", help="solve one parameter point")
    _point_flags(p)
    p.add_argument("--out", type=Path, help="also write the records as CSV")

    p = sub.add_parser("sweep", help="sweep one or two parameters")
    _point_flags(p)
    _output_flags(p)
    p.add_argument(
        "--axis",
        required=True,
        help="NAME:SCALE:START:STOP:COUNT or NAME:list:V1,V2,... with SCALE linear|log10; NAME in "
        "delta_over_2omega, two_omega_over_gamma, kappa_over_gamma, nbar, g_over_gamma, "
        "omega_ph_over_gamma, gamma_c_over_gamma",
    )
    p.add_argument("--axis2", help="optional second axis, same syntax")

    p = sub.add_parser(
        "figure",
        help="built-in recipes for Figs. 1(a-c) and 2",
        description="Default axis ranges: fig1a Delta/(2Omega) in "
        "[-1.5, 1.5] with 301 points; fig1b/fig2 kappa/gamma in [1e-3, 1e2]; fig1c kappa/gamma in "
        "[1e-3, 1e2] x 2Omega/gamma in [5, 50]. Override with --axis/--axis2.",
    )
    p.add_argument("recipe", choices=sorted(RECIPES))
    _point_flags(p)
    _output_flags(p)
    p.add_argument("--axis", help="replace the recipe's first axis")
    p.add_argument("--axis2", help="replace the recipe's second axis")

    p = sub.add_parser("oracle-check", help="compare the hierarchy with the full Lindblad steady state")
    _point_flags(p)
    p.add_argument("--n-max", type=int, default=10, help="Fock truncation for both routes (default 10)")
    p.add_argument("--check-tol", type=float, default=1e-8, help="pass threshold (default 1e-8)")
    p.add_argument("--corrupt-generator", action="store_true", help=argparse.SUPPRESS)
    return parser


def read_config(path: Path) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment; keys use flag spelling."""
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _parse_with_config(parser: argparse.ArgumentParser, argv: list[str] | None) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    try:
        values = read_config(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    # a config value only fills flags that were left unset on the command line
    for key, raw in values.items():
        if not hasattr(args, key):
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, key) is not None:
            continue
        conv = {"n_start": int, "n_cap": int, "jobs": int, "n_max": int}.get(key)
        if key in ("mode", "closure", "solver", "axis", "axis2", "recipe"):
            conv = str
        elif key in ("out", "svg"):
            conv = Path
        try:
            setattr(args, key, (conv or float)(raw))
        except ValueError as exc:
            raise UsageError(f"bad config value for {key}: {raw!r}") from exc
    return args


def _point_config(args: argparse.Namespace, base: PointConfig | None = None) -> PointConfig:
    base = base or PointConfig()
    updates = {f: getattr(args, k) for k, f in _POINT_FLAGS.items() if getattr(args, k, None) is not None}
    if args.nbar is not None:
        if args.temperature is not None:
            log.warning("both nbar and temperature given; using nbar=%g", args.nbar)
        updates["nbar"] = args.nbar
    elif args.temperature is not None:
        omega_ph = updates.get("omega_ph", base.omega_ph)
        gamma_si = args.gamma_si if args.gamma_si is not None else DEFAULT_GAMMA_SI
        updates["nbar"] = thermal_occupation(omega_ph, args.temperature, gamma_si)
        log.info("nbar=%.6g from T=%g K", updates["nbar"], args.temperature)
    return replace(base, **updates)


def _modes(args: argparse.Namespace, default: tuple[Mode, ...] = (Mode.BEYOND, Mode.SECULAR)) -> tuple[Mode, ...]:
    if args.mode is None:
        return default
    if args.mode == "both":
        return (Mode.BEYOND, Mode.SECULAR)
    return (Mode.parse(args.mode),)


def _error_line(exc: BaseException) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc)})


def _emit(spec: SweepSpec, records, args: argparse.Namespace) -> None:
    write_csv(records, args.out)
    if args.svg:
        from .plot import write_svg

        if args.svg is True:
            if args.out is None:
                raise UsageError("--svg without a path needs --out")
            svg_path = args.out.with_suffix(".svg")
        else:
            svg_path = args.svg
        write_svg(spec, records, svg_path)
        log.info("wrote %s", svg_path)
    bad = [r for r in records if not r.ok]
    if bad:
        log.warning("%d of %d grid points failed (see status column)", len(bad), len(records))


def _cmd_steady(args: argparse.Namespace) -> int:
    cfg = _point_config(args)
    records = run_point(cfg, _modes(args))
    for r in records:
        print(
            f"mode={r.mode.value} n_mean={r.n_mean:.12g} g2={r.g2:.12g} "
            f"n_max_used={r.n_max_used} residual={r.residual:.3e}"
        )
    if args.out:
        write_csv(records, args.out)
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec = SweepSpec(
        axis1=Axis.parse(args.axis),
        axis2=Axis.parse(args.axis2) if args.axis2 else None,
        fixed=_point_config(args),
        modes=_modes(args),
    )
    records = run_sweep(spec, args.jobs if args.jobs is not None else default_jobs())
    _emit(spec, records, args)
    return EXIT_OK


def _cmd_figure(args: argparse.Namespace) -> int:
    recipe = RECIPES[args.recipe]
    spec = SweepSpec(
        axis1=Axis.parse(args.axis) if args.axis else recipe.axis1,
        axis2=Axis.parse(args.axis2) if args.axis2 else recipe.axis2,
        fixed=_point_config(args, recipe.fixed),
        modes=_modes(args, recipe.modes),
        caption=recipe.caption,
    )
    log.info("%s", spec.caption)
    records = run_sweep(spec, args.jobs if args.jobs is not None else default_jobs())
    _emit(spec, records, args)
    return EXIT_OK


def _cmd_oracle(args: argparse.Namespace) -> int:
    cfg = _point_config(args)
    report = run_oracle_check(cfg, args.n_max, _modes(args), args.check_tol, corrupt=args.corrupt_generator)
    print("\n".join(report.lines()))
    return EXIT_OK if report.passed else EXIT_VALIDATION


_COMMANDS = {"steady": _cmd_steady, "sweep": _cmd_sweep, "figure": _cmd_figure, "oracle-check": _cmd_oracle}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = _parse_with_config(parser, argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
        )
        return _COMMANDS[args.command](args)
    except (UsageError, ParameterError, ValueError, oracle.DimensionOverflow) as exc:
        print(_error_line(exc), file=sys.stderr)
        return EXIT_USAGE
    except (hierarchy.HierarchyError, oracle.OracleError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
