"""Command-line entry point: single runs, convergence studies and scheme sweeps.

Exit codes: 0 on success, 1 on numerical failure, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from cgweno.assembly import MassSolveError
from cgweno.config import ConfigError, RunConfig, load_config
from cgweno.element import ElementSpace
from cgweno.problems import antisymmetry_defect, eoc
from cgweno.sensor import SensorParams, gamma as sensor_gamma
from cgweno.solver import RunResult, cells_for_dofs, simulate
from cgweno.timestepping import NumericalBlowup

logger = logging.getLogger("cgweno")

THREADS_ENV = "CGWENO_THREADS"
EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2

RUN_COLUMNS = ["problem", "scheme", "p", "cells", "N_h", "E1", "u_min", "u_max",
               "steps", "wall_time"]
TABLE_COLUMNS = ["scheme", "N_h", "E1", "EOC", "steps", "wall_time"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return "%.6e" % value
    return str(value)


# {{{ running


def resolve_cells(config: RunConfig, dofs: int | None = None) -> int:
    prob = config.problem_definition()
    if dofs is None and config.cells is not None:
        return config.cells
    dofs = dofs if dofs is not None else config.dofs
    if dofs is None:
        raise ConfigError("config needs either cells or dofs")
    try:
        return cells_for_dofs(prob, config.p, dofs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def run_config(config: RunConfig, scheme: str | None = None,
               dofs: int | None = None) -> RunResult:
    return simulate(
        config.problem_definition(),
        config.p,
        resolve_cells(config, dofs),
        config.stabilization(scheme),
        cfl=config.cfl,
        final_time=config.final_time,
        rk_order=config.rk_order,
        nodes=config.nodes,
        quadrature=config.quadrature,
        mass_solver=config.mass_solver,
        size_factor=config.size_factor,
        track_extrema=config.track_extrema,
    )


def convergence_table(config: RunConfig, levels: list[int],
                      schemes: list[str] | None = None) -> list[dict]:
    """One row per (scheme, level) with N_h, E1 and the EOC against the previous level."""
    rows = []
    for scheme in schemes or [config.scheme]:
        results = [run_config(config, scheme, dofs=n) for n in levels]
        if any(r.l1_error is None for r in results):
            raise ConfigError(f"problem {config.problem!r} has no exact solution at this time")
        rates = eoc([r.l1_error for r in results], [r.n_dofs for r in results],
                    config.problem_definition().dim)
        for r, rate in zip(results, rates):
            rows.append({"scheme": scheme, "N_h": r.n_dofs, "E1": r.l1_error, "EOC": rate,
                         "steps": r.steps, "wall_time": r.wall_time})
    return rows


def format_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def parse_table(text: str) -> list[tuple[int, float, float | None]]:
    """Read (N_h, E1, EOC) triples back from convergence CSV output."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        rate = row["EOC"]
        out.append((int(row["N_h"]), float(row["E1"]), float(rate) if rate else None))
    return out


def result_row(r: RunResult) -> dict:
    return {"problem": r.problem, "scheme": r.scheme, "p": r.p, "cells": r.cells,
            "N_h": r.n_dofs, "E1": r.l1_error, "u_min": r.u_min, "u_max": r.u_max,
            "steps": r.steps, "wall_time": r.wall_time}


# }}}


# {{{ field output


def _grid_values(space: ElementSpace, u: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Nodal values on the tensor grid of all Lagrange nodes (x varying fastest)."""
    coords = space.dof_coords
    axes, index = [], []
    for a in range(space.dim):
        ax = np.unique(np.round(coords[:, a], 12))
        axes.append(ax)
        index.append(np.searchsorted(ax, np.round(coords[:, a], 12)))
    grid = np.empty([ax.size for ax in axes][::-1])
    grid[tuple(index[::-1])] = u
    return grid, axes


def dump_field(space: ElementSpace, u: np.ndarray, path: str | Path, fmt: str = "text") -> None:
    """Write nodal values: two columns in 1D, a headed value grid in 2D, or VTK legacy."""
    path = Path(path)
    grid, axes = _grid_values(space, np.asarray(u, dtype=float))
    mesh = space.mesh
    if fmt == "vtk":
        axes3 = axes + [np.zeros(1)] * (3 - space.dim)
        # Gauss-Lobatto nodes are not equispaced and need the rectilinear form
        uniform = all(ax.size < 3 or np.allclose(np.diff(ax), ax[1] - ax[0], rtol=1e-9)
                      for ax in axes3)
        lines = [
            "# vtk DataFile Version 3.0",
            "cgweno solution",
            "ASCII",
            "DATASET STRUCTURED_POINTS" if uniform else "DATASET RECTILINEAR_GRID",
            "DIMENSIONS %d %d %d" % tuple(ax.size for ax in axes3),
        ]
        if uniform:
            lines.append("ORIGIN %.16e %.16e %.16e" % tuple(ax[0] for ax in axes3))
            lines.append("SPACING %.16e %.16e %.16e"
                         % tuple(ax[1] - ax[0] if ax.size > 1 else 1.0 for ax in axes3))
        else:
            for name, ax in zip("XYZ", axes3):
                lines.append(f"{name}_COORDINATES {ax.size} double")
                lines.append(" ".join("%.16e" % v for v in ax))
        lines += ["POINT_DATA %d" % grid.size, "SCALARS u double 1", "LOOKUP_TABLE default"]
        lines += ["%.16e" % v for v in grid.ravel()]
        path.write_text("\n".join(lines) + "\n")
        return
    if fmt != "text":
        raise ValueError(f"unknown dump format {fmt!r}")
    if space.dim == 1:
        np.savetxt(path, np.column_stack([axes[0], grid]), fmt="%.16e")
        return
    (x0, x1), (y0, y1) = mesh.bounds
    header = f"nx {axes[0].size} ny {axes[1].size} bounds {x0!r} {x1!r} {y0!r} {y1!r}"
    np.savetxt(path, grid, fmt="%.16e", header=header)


def read_field(path: str | Path) -> tuple[dict, np.ndarray]:
    """Inverse of the text format of :func:`dump_field`."""
    path = Path(path)
    first = path.open().readline()
    if first.startswith("# nx"):
        tok = first[1:].split()
        meta = {"nx": int(tok[1]), "ny": int(tok[3]), "bounds": tuple(map(float, tok[5:9]))}
        return meta, np.loadtxt(path, ndmin=2)
    data = np.loadtxt(path, ndmin=2)
    return {"nx": data.shape[0]}, data


def dump_gamma(space: ElementSpace, u: np.ndarray, params: SensorParams, path: str | Path) -> None:
    """Per-cell sensor state of ``u``: centroid, gamma and the candidate beta values."""
    g, state = sensor_gamma(space, u, params, return_state=True)
    centroids = space.mesh.centroids
    present = np.concatenate([np.ones((space.n_cells, 1), bool), space.mesh.neighbors >= 0], axis=1)
    n_beta = state.beta.shape[1]
    cols = (["cell"] + [f"x{a}" for a in range(space.dim)] + ["gamma"]
            + [f"beta{l}" for l in range(n_beta)])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for e in range(space.n_cells):
            # missing boundary stencils are left blank
            betas = ["%.6e" % b if ok else "" for b, ok in zip(state.beta[e], present[e])]
            writer.writerow([e, *("%.6e" % c for c in centroids[e]), "%.6e" % g[e], *betas])


# }}}


# {{{ commands


def _apply_threads(config: RunConfig) -> RunConfig:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            config = config.replace(threads=int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return config


def _strip_timing(rows: list[dict], config: RunConfig) -> list[dict]:
    if config.deterministic:
        for row in rows:
            row["wall_time"] = None
    return rows


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    sys.stdout.write(text)


def cmd_run(config: RunConfig, args) -> int:
    r = run_config(config)
    rows = _strip_timing([result_row(r)], config)
    text = format_csv(rows, RUN_COLUMNS)
    if r.problem == "burgers" and r.l1_error is None:
        text += "antisymmetry_defect,%.6e\n" % antisymmetry_defect(r.space, r.u)
    _emit(text, config.output)
    if config.dump:
        dump_field(r.space, r.u, config.dump, config.dump_format)
    if config.gamma_dump:
        dump_gamma(r.space, r.u, config.stabilization().sensor_params(), config.gamma_dump)
    return EXIT_OK


def cmd_convergence(config: RunConfig, args) -> int:
    levels = args.levels or config.levels
    if not levels:
        raise ConfigError("convergence needs --levels or a levels key")
    rows = _strip_timing(convergence_table(config, levels, [config.scheme]), config)
    _emit(format_csv(rows, TABLE_COLUMNS), config.output)
    return EXIT_OK


def cmd_sweep(config: RunConfig, args) -> int:
    schemes = args.schemes or config.schemes or ["CG", "VMS", "HO", "LO", "WENO"]
    levels = args.levels or config.levels
    if levels:
        rows = _strip_timing(convergence_table(config, levels, schemes), config)
        _emit(format_csv(rows, TABLE_COLUMNS), config.output)
        return EXIT_OK
    rows = _strip_timing([result_row(run_config(config, s)) for s in schemes], config)
    _emit(format_csv(rows, RUN_COLUMNS), config.output)
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgweno", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single run with a report line")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)

    p_conv = sub.add_parser("convergence", help="grid convergence table")
    p_conv.add_argument("config")
    p_conv.add_argument("--levels", type=_int_list, help="DoF counts, e.g. 16,32,64")
    p_conv.set_defaults(func=cmd_convergence)

    p_sweep = sub.add_parser("sweep", help="compare schemes on one setup")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--schemes", type=_str_list, help="e.g. CG,VMS,HO,LO,WENO")
    p_sweep.add_argument("--levels", type=_int_list)
    p_sweep.set_defaults(func=cmd_sweep)

    for p in (p_run, p_conv, p_sweep):
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        if args.set:
            from cgweno.config import from_mapping

            pairs = {}
            for item in args.set:
                key, sep, value = item.partition("=")
                if not sep:
                    raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
                pairs[key] = value
            config = from_mapping(pairs, base=config)
        if getattr(args, "schemes", None):
            config = config.replace(schemes=args.schemes)
            config.validate()
        config = _apply_threads(config)
        return args.func(config, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalBlowup, MassSolveError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
