"""Command-line front end.

``multicut <command> --config <path> [--out <path>] [--grid N] [--exclusion R]``

Commands: ``solve``, ``density``, ``kernel``, ``respond``, ``variance``,
``oracle``, ``verify``. Exit codes: 0 success, 1 verification failure,
2 configuration error, 3 computation error. Tables are CSV with a header and
17 significant digits; summaries are JSON with sorted keys. The number of
worker threads for kernel grids is taken from ``MULTICUT_THREADS``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .equilibrium import ConsistencyError, EquilibriumSolution, SolverError, solution_from_support, solve
from .kernel import THREADS_ENV, KernelError, kernel_grid, respond, variance
from .oracle import OracleError, discrete_equilibrium
from .quadrature import QuadratureError, make_mesh
from .serialize import dump_json, solution_record, write_csv
from .surface import SurfaceError
from .verify import DEFAULT_TOLERANCES, format_result, run_checks

__all__ = ["main", "EXIT_OK", "EXIT_VERIFY", "EXIT_CONFIG", "EXIT_COMPUTE"]

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_COMPUTE = 0, 1, 2, 3

COMPUTE_ERRORS = (SolverError, ConsistencyError, SurfaceError, QuadratureError, KernelError,
                  OracleError, np.linalg.LinAlgError, FloatingPointError)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _summary(obj: dict, out: str | None) -> None:
    """Summary JSON next to a table: stdout when the table went to a file,
    stderr when the table itself went to stdout."""
    (sys.stdout if out is not None else sys.stderr).write(dump_json(obj))


def get_solution(cfg: RunConfig) -> EquilibriumSolution:
    cfg.require_problem()
    if cfg.is_solution:
        return solution_from_support(cfg.potential, cfg.support, cfg.options.n, cfg.cycles,
                                     cfg.options.n_gap)
    return solve(cfg.potential, cfg.support, cfg.options, cfg.cycles)


def cmd_solve(cfg: RunConfig, args) -> int:
    sol = get_solution(cfg)
    table = None
    if args.out:
        out = Path(args.out)
        table = out.with_suffix(".density.csv")
        _write_density(sol, None, str(table))
        table = table.name
    _emit(dump_json(solution_record(sol, table)), args.out)
    return EXIT_OK


def _write_density(sol: EquilibriumSolution, grid: int | None, out: str | None) -> str:
    cuts, xs, vals = [], [], []
    for j, (mesh, v) in enumerate(zip(sol.cache.cut_meshes, sol.sigma.values)):
        if grid:
            x = make_mesh(mesh.interval, grid).nodes
            v = sol.sigma.at(x)
        else:
            x = mesh.nodes
        cuts.append(np.full(x.size, str(j + 1), dtype=object))
        xs.append(x)
        vals.append(v)
    return write_csv(out, ["cut", "x", "sigma"], [np.concatenate(cuts), np.concatenate(xs),
                                                   np.concatenate(vals)])


def cmd_density(cfg: RunConfig, args) -> int:
    text = _write_density(get_solution(cfg), args.grid, None)
    _emit(text, args.out)
    return EXIT_OK


def cmd_kernel(cfg: RunConfig, args) -> int:
    sol = get_solution(cfg)
    exclusion = args.exclusion if args.exclusion is not None else cfg.exclusion
    grid = kernel_grid(sol, args.grid or cfg.kernel_grid, exclusion=exclusion, method=cfg.kernel_method)
    X, T = np.meshgrid(grid.x, grid.t, indexing="ij")
    keep = grid.mask
    text = write_csv(None, ["x", "t", "C"], [X[keep], T[keep], grid.values[keep]])
    _emit(text, args.out)
    return EXIT_OK


def cmd_respond(cfg: RunConfig, args) -> int:
    if cfg.perturbation is None:
        raise ConfigError(f"{cfg.source}: respond needs a 'perturbation'")
    sol = get_solution(cfg)
    r = respond(sol, cfg.perturbation, mass_tol=cfg.mass_tol)
    text = write_csv(None, ["x", "dsigma"], [np.concatenate(r.nodes), np.concatenate(r.values)])
    _emit(text, args.out)
    _summary({"dA": r.dA, "total_mass": r.total_mass,
              "gap_residuals": [float(g) for g in r.gap_residuals]}, args.out)
    return EXIT_OK


def cmd_variance(cfg: RunConfig, args) -> int:
    f = cfg.test_function or cfg.perturbation
    if f is None:
        raise ConfigError(f"{cfg.source}: variance needs a 'test_function'")
    v = variance(get_solution(cfg), f)
    _emit(dump_json({"variance": v, "test_function": f.description}), args.out)
    return EXIT_OK


def cmd_oracle(cfg: RunConfig, args) -> int:
    cfg.require_potential()
    m = discrete_equilibrium(cfg.potential, cfg.oracle_box, args.grid or cfg.oracle_n,
                             iters=cfg.oracle_iters, self_energy=cfg.oracle_self_energy)
    text = write_csv(None, ["x", "weight", "density"], [m.grid, m.weights, m.density])
    _emit(text, args.out)
    _summary({"energy": m.energy, "iterations": m.iterations, "converged": m.converged,
              "intervals": [list(iv) for iv in m.intervals(cfg.oracle_threshold)]}, args.out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    unknown = sorted(set(cfg.verify_tolerances) - set(DEFAULT_TOLERANCES))
    if unknown:
        raise ConfigError(f"{cfg.source}: unknown verify tolerances {unknown}; "
                          f"known: {sorted(DEFAULT_TOLERANCES)}")
    results = run_checks(cfg.verify_tolerances, cfg.verify_only, stream=sys.stdout)
    passed = sum(r.passed for r in results)
    tail = f"{passed}/{len(results)} checks passed\n"
    sys.stdout.write(tail)
    if args.out:
        Path(args.out).write_text("".join(format_result(r) + "\n" for r in results) + tail)
    return EXIT_OK if passed == len(results) else EXIT_VERIFY


COMMANDS = {
    "solve": cmd_solve,
    "density": cmd_density,
    "kernel": cmd_kernel,
    "respond": cmd_respond,
    "variance": cmd_variance,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="multicut",
        description="Equilibrium measures with several cuts and their linear response.",
        epilog=f"Thread count for kernel grids: ${THREADS_ENV}. "
               "Exit codes: 0 ok, 1 verification failed, 2 config error, 3 computation error.",
    )
    ap.add_argument("command", choices=list(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON configuration or solution file")
    ap.add_argument("--out", help="output path (default: stdout)")
    ap.add_argument("--grid", type=int, help="points per cut (density, kernel) or grid size (oracle)")
    ap.add_argument("--exclusion", type=float, help="half-width of the excluded diagonal band")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.grid is not None and args.grid < 1:
        print("error: --grid must be positive", file=sys.stderr)
        return EXIT_CONFIG
    if args.exclusion is not None and not args.exclusion > 0:
        print("error: --exclusion must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        if args.out is None and cfg.output is not None:
            args.out = cfg.output
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except COMPUTE_ERRORS as exc:
        cond = getattr(exc, "condition", "")
        suffix = f" [failing condition: {cond}]" if cond else ""
        print(f"computation error: {type(exc).__name__}: {exc}{suffix}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
