"""Command line interface: ``reynolds-osgs {solve,converge,extract-line,presets}``.

Exit codes: 0 success, 1 usage or configuration error, 2 solver non-convergence.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .io import (
    ConfigError,
    RunConfig,
    extract_line,
    load_config,
    parse_config,
    read_field_csv,
    write_convergence_csv,
    write_field_csv,
    write_line_csv,
    write_trace_csv,
    write_vtk,
)
from .mesh import build_mesh
from .solver import SolverError, solve_nonlinear
from .verification import convergence_study, error_l2, get_case

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2

PRESETS = {
    "smooth": """\
# Smooth manufactured solution with a pressure and a cavitation zone.
[case]
name = smooth

[model]
stabilization_mode = osgs

[mesh]
nx = 96
ny = 32

[solver]
picard_warmup = 4
max_iterations = 50

[output]
directory = output/smooth
formats = csv
""",
    "boundary_layer": """\
# Manufactured solution with a steep exponential layer at x = 2 pi.
[case]
name = boundary_layer

[model]
stabilization_mode = osgs
shock_capturing = true
beta = 0.7

[mesh]
nx = 24
ny = 8

[output]
directory = output/boundary_layer
formats = csv
""",
    "bearing": """\
# Journal bearing, minimum gap at 140 degrees.
[case]
name = bearing

[model]
zeta = 0.6
x_a = 7*pi/9
u_bar = 0.98

[mesh]
nx = 100
ny = 32

[output]
directory = output/bearing
formats = csv, vtk
""",
}

log = logging.getLogger("reynolds_osgs")


def _resolve(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigError("give either a config file or --preset, not both")
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; available: {', '.join(PRESETS)}")
        cfg = parse_config(PRESETS[args.preset], source=f"preset:{args.preset}")
    elif args.config:
        cfg = load_config(args.config)
    else:
        raise ConfigError("a config file or --preset is required")
    if args.output:
        cfg.output_dir = Path(args.output)
    return cfg


def _prepare_output(cfg: RunConfig) -> Path:
    out = cfg.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    return out


def cmd_solve(args) -> int:
    cfg = _resolve(args)
    if cfg.nx is None:
        raise ConfigError("solve needs 'mesh.nx' and 'mesh.ny'")
    out = _prepare_output(cfg)
    provenance = cfg.to_ini()
    mesh = build_mesh(cfg.nx, cfg.ny, cfg.model.x_range, cfg.model.y_range)
    case = get_case(cfg.case, **_model_kwargs(cfg)) if cfg.case else None
    forcing = case.forcing_fn if case else None

    sol = solve_nonlinear(mesh, cfg.model, cfg.solver, forcing)
    write_trace_csv(out / "trace.csv", sol.trace, provenance)
    write_field_csv(out / "field.csv", mesh, sol.u, sol.xi, provenance)
    if "vtk" in cfg.formats:
        write_vtk(out / "field.vtk", mesh, sol.u, sol.xi, title=f"reynolds-osgs {cfg.case or 'custom'}")

    summary = [
        f"converged = {str(sol.trace.converged).lower()}",
        f"iterations = {sol.trace.iterations}",
        f"final_residual = {sol.trace.records[-1].residual if sol.trace.records else sol.trace.initial_residual:.17g}",
        f"u_min = {sol.u.min():.17g}",
        f"u_max = {sol.u.max():.17g}",
    ]
    if case is not None and case.has_exact:
        summary.append(f"error_l2 = {error_l2(sol.u, case, mesh):.17g}")
    (out / "summary.txt").write_text("".join(f"# {l}\n" for l in provenance.splitlines()) + "\n".join(summary) + "\n")
    print("\n".join(summary))
    return EXIT_OK if sol.trace.converged else EXIT_NOT_CONVERGED


def _model_kwargs(cfg: RunConfig) -> dict:
    m = cfg.model
    return dict(zeta=m.zeta, x_a=m.x_a, u_bar=m.u_bar, c1=m.c1, c2=m.c2, beta=m.beta,
                stabilization_mode=m.stabilization_mode, shock_capturing=m.shock_capturing,
                x_range=m.x_range, y_range=m.y_range)


def cmd_converge(args) -> int:
    cfg = _resolve(args)
    if not cfg.has_series:
        raise ConfigError("converge needs 'mesh.base_nx', 'mesh.base_ny' and 'mesh.levels'")
    if cfg.case is None or not get_case(cfg.case).has_exact:
        raise ConfigError("converge needs a manufactured case ('case.name' = smooth or boundary_layer)")
    out = _prepare_output(cfg)
    case = get_case(cfg.case, **_model_kwargs(cfg))
    base = build_mesh(cfg.base_nx, cfg.base_ny, cfg.model.x_range, cfg.model.y_range)
    rows = convergence_study(case, base, cfg.levels, cfg.solver)
    write_convergence_csv(out / "convergence.csv", rows, cfg.to_ini())

    print(f"{'level':>5} {'nx':>5} {'ny':>5} {'h':>10} {'error_l2':>12} {'order':>7} {'iters':>5} {'time[s]':>8}")
    for r in rows:
        order = f"{r.order:7.3f}" if r.order is not None else " " * 7
        print(f"{r.level:5d} {r.nx:5d} {r.ny:5d} {r.h:10.4e} {r.error_l2:12.4e} {order} {r.iterations:5d} {r.wall_time:8.3f}")
    return EXIT_OK if all(r.converged for r in rows) else EXIT_NOT_CONVERGED


def cmd_extract_line(args) -> int:
    try:
        data = read_field_csv(args.field)
    except OSError as exc:
        raise ConfigError(f"cannot read field file {args.field}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        x, u = extract_line(data, args.y)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            write_line_csv(fh, x, u)
    else:
        write_line_csv(sys.stdout, x, u)
    return EXIT_OK


def cmd_presets(args) -> int:
    if args.show:
        if args.show not in PRESETS:
            raise ConfigError(f"unknown preset {args.show!r}; available: {', '.join(PRESETS)}")
        print(PRESETS[args.show], end="")
        return EXIT_OK
    for number, name in enumerate(PRESETS, start=1):
        print(f"{number}  {name:15s} {PRESETS[name].splitlines()[0].lstrip('# ')}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reynolds-osgs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log every nonlinear iteration")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_ in (("solve", cmd_solve, "solve one configuration"),
                            ("converge", cmd_converge, "run a mesh refinement study")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", nargs="?", help="run configuration file")
        p.add_argument("--preset", help="use a built-in configuration instead of a file")
        p.add_argument("-o", "--output", help="override the output directory")
        p.set_defaults(func=fn)

    p = sub.add_parser("extract-line", help="sample a field file along y = const")
    p.add_argument("field", help="field CSV written by 'solve'")
    p.add_argument("--y", type=float, default=0.0, help="line position (nearest mesh line is used)")
    p.add_argument("-o", "--output", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_extract_line)

    p = sub.add_parser("presets", help="list built-in cases")
    p.add_argument("--show", metavar="NAME", help="print the configuration of one preset")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
