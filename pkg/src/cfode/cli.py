"""``cfode`` command line: solve-linear, solve-nonlinear, solve-msd, verify, replay.

Series go to files (CSV ``t,<name>`` or JSON), the report is one JSON object
on stdout, and every run that writes a series also writes
``<out>.manifest.json`` from which ``cfode replay`` reproduces it.

Exit codes: 0 ok, 2 validation, 3 solver/domain error, 4 not contractive,
5 iteration limit.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cf_operator import CFOrder
from .errors import CFOdeError, ExprError, MaxIterationsExceeded, NotContractive
from .exprparse import evaluate, parse
from .linear_solver import LinearProblem, discriminant_case, linear_residual, solve
from .msd import MSDParams, kernel_coefficients, msd_residual, printed_coefficients, solve_msd
from .nonlinear_solver import NonlinearProblem, picard_solve
from .quadrature import Grid, GridFunction, derivative

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_NOT_CONTRACTIVE, EXIT_MAX_ITER = 0, 2, 3, 4, 5


class ValidationError(Exception):
    pass


class SolverFailure(Exception):
    def __init__(self, message: str, code: int = EXIT_SOLVER):
        super().__init__(message)
        self.code = code


# ------------------------------------------------------------------ I/O


def fmt(x: float) -> str:
    return repr(float(x))


def write_series(path: Path, t: np.ndarray, values: np.ndarray, name: str, fmt_kind: str = "csv"):
    if fmt_kind == "json":
        doc = {"t": [float(v) for v in t], name: [float(v) for v in values]}
        text = json.dumps(doc) + "\n"
    else:
        lines = [f"t,{name}"] + [f"{fmt(a)},{fmt(b)}" for a, b in zip(t, values)]
        text = "\n".join(lines) + "\n"
    path.write_text(text, encoding="utf-8", newline="\n")


def read_series(path: str, flag: str) -> tuple[np.ndarray, np.ndarray, str]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ValidationError(f"{flag}: cannot read {path}: {exc.strerror}") from None
    if not lines:
        raise ValidationError(f"{flag}: {path} is empty")
    header = lines[0].strip().split(",")
    if len(header) != 2 or header[0].strip() != "t":
        raise ValidationError(f"{flag}: header must be 't,<name>', got {lines[0]!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ValidationError(f"{flag}: malformed line {lineno} in {path}: {line!r}") from None
    if len(rows) < 2:
        raise ValidationError(f"{flag}: need at least two samples in {path}")
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        raise ValidationError(f"{flag}: non-finite values in {path}")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ValidationError(f"{flag}: time column must be strictly increasing")
    return data[:, 0], data[:, 1], header[1].strip()


def forcing_from_csv(path: str, grid: Grid, flag: str) -> tuple[GridFunction, GridFunction]:
    t, v, _ = read_series(path, flag)
    slack = 1e-9 * max(1.0, abs(grid.t1))
    if t[0] > grid.t0 + slack or t[-1] < grid.t1 - slack:
        raise ValidationError(f"{flag}: samples cover [{t[0]}, {t[-1]}], need [{grid.t0}, {grid.t1}]")
    f = GridFunction(grid, np.interp(grid.nodes, t, v), name="f")
    return f, derivative(f)


def forcing_from_expr(src: str, grid: Grid, flag: str):
    try:
        expr = parse(src, variables=("t",))
    except ExprError as exc:
        raise ValidationError(f"{flag}: {exc}") from None
    try:
        return expr, GridFunction(grid, evaluate(expr, grid.nodes), name="f")
    except ExprError as exc:
        raise SolverFailure(f"{flag}: {exc}") from None


def emit(report: dict):
    sys.stdout.write(json.dumps(report) + "\n")


def write_manifest(out: Path, command: str, argv: list[str], params: dict, grid: Grid, results: dict, started: float):
    manifest = {
        "command": command,
        "version": __version__,
        "argv": argv,
        "parameters": params,
        "grid": {"t0": grid.t0, "t1": grid.t1, "n": grid.n},
        "results": results,
        "wall_time_s": time.perf_counter() - started,
    }
    Path(f"{out}.manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


# ------------------------------------------------------------ validation


def require(cond: bool, flag: str, message: str):
    if not cond:
        raise ValidationError(f"{flag}: {message}")


def make_grid(t0: float, t1: float, n: int) -> Grid:
    require(math.isfinite(t0), "--a", "must be finite")
    require(math.isfinite(t1) and t1 > t0, "--t1", f"must be finite and greater than the start {t0}")
    require(n >= 4, "--n", f"need at least 4 nodes, got {n}")
    return Grid(t0, t1, n)


def check_order(value: float, flag: str):
    require(0.0 < value < 1.0, flag, f"must lie in (0, 1), got {value}")


# -------------------------------------------------------------- commands


def cmd_solve_linear(args, argv, started) -> dict:
    check_order(args.alpha, "--alpha")
    require(math.isfinite(args.lam), "--lambda", "must be finite")
    grid = make_grid(args.a, args.t1, args.n)
    order = CFOrder(args.alpha)
    if args.f_csv is not None:
        f, fp = forcing_from_csv(args.f_csv, grid, "--f-csv")
        problem = LinearProblem(order, args.lam, f, fp, args.u0, args.du0)
    else:
        expr, _ = forcing_from_expr(args.f, grid, "--f")
        try:
            problem = LinearProblem.from_expression(order, args.lam, expr, grid, args.u0, args.du0)
        except ExprError as exc:
            raise SolverFailure(f"--f: {exc}") from None
    sol = solve(problem)
    out = Path(args.out)
    write_series(out, grid.nodes, sol.u.values, "u", args.format)
    report = {
        "command": "solve-linear",
        "case": sol.case_tag.value,
        "formula": sol.formula,
        "discriminant": discriminant_case(order, args.lam)[0],
        "constants": list(sol.constants),
        "residual_max_norm": sol.residual_norm,
        "out": str(out),
    }
    params = {"alpha": args.alpha, "lambda": args.lam, "a": args.a, "f": args.f, "f_csv": args.f_csv, "u0": args.u0, "du0": args.du0, "format": args.format}
    write_manifest(out, "solve-linear", argv, params, grid, report, started)
    return report


def cmd_solve_nonlinear(args, argv, started) -> dict:
    check_order(args.alpha, "--alpha")
    require(math.isfinite(args.T) and args.T > 0, "--T", f"must be positive, got {args.T}")
    require(args.L1 >= 0, "--L1", "must be non-negative")
    require(args.L2 >= 0, "--L2", "must be non-negative")
    require(args.tol > 0, "--tol", "must be positive")
    require(args.max_iter >= 1, "--max-iter", "must be at least 1")
    require(args.n >= 4, "--n", f"need at least 4 nodes, got {args.n}")
    try:
        problem = NonlinearProblem.from_expression(CFOrder(args.alpha), args.T, args.phi, args.L1, args.L2, args.U0, args.U1, args.n)
    except ExprError as exc:
        raise ValidationError(f"--phi: {exc}") from None
    try:
        u, state = picard_solve(problem, tol=args.tol, max_iter=args.max_iter)
    except NotContractive as exc:
        raise SolverFailure(str(exc), EXIT_NOT_CONTRACTIVE) from None
    except MaxIterationsExceeded as exc:
        raise SolverFailure(str(exc), EXIT_MAX_ITER) from None
    except ExprError as exc:
        raise SolverFailure(f"--phi: {exc}") from None
    out = Path(args.out)
    write_series(out, problem.grid.nodes, u.values, "u")
    report = {
        "command": "solve-nonlinear",
        "q": state.q,
        "iterations": state.iteration_count,
        "final_diff": state.successive_diffs[-1],
        "error_bound": state.error_bound,
        "out": str(out),
    }
    params = {"alpha": args.alpha, "T": args.T, "phi": args.phi, "L1": args.L1, "L2": args.L2, "U0": args.U0, "U1": args.U1, "tol": args.tol, "max_iter": args.max_iter}
    write_manifest(out, "solve-nonlinear", argv, params, problem.grid, report, started)
    return report


def cmd_solve_msd(args, argv, started) -> dict:
    check_order(args.gamma, "--gamma")
    require(args.m > 0, "--m", "mass must be positive")
    require(args.delta >= 0, "--delta", "damping must be non-negative")
    require(args.k > 0, "--k", "spring constant must be positive")
    require(args.sigma > 0, "--sigma", "must be positive")
    grid = make_grid(0.0, args.t1, args.n)
    if args.F_csv is not None:
        F, _ = forcing_from_csv(args.F_csv, grid, "--F-csv")
    else:
        _, F = forcing_from_expr(args.F, grid, "--F")
    params = MSDParams(args.m, args.delta, args.k, args.sigma, args.gamma)
    x = solve_msd(params, F, args.x0)
    A, B = kernel_coefficients(params)
    A_p, B_p = printed_coefficients(params)
    out = Path(args.out)
    write_series(out, grid.nodes, x.values, "x")
    report = {
        "command": "solve-msd",
        "A": A,
        "B": B,
        "A_printed": A_p,
        "B_printed": B_p,
        "solvability": params.solvability,
        "x0": float(x.values[0]),
        "residual_max_norm": msd_residual(params, x, F).max_norm(),
        "out": str(out),
    }
    Path(f"{out}.report.json").write_text(json.dumps(report) + "\n", encoding="utf-8")
    p = {"gamma": args.gamma, "m": args.m, "delta": args.delta, "k": args.k, "sigma": args.sigma, "F": args.F, "F_csv": args.F_csv, "x0": args.x0}
    write_manifest(out, "solve-msd", argv, p, grid, report, started)
    return report


def cmd_verify(args, argv, started) -> dict:
    check_order(args.alpha, "--alpha")
    t, u, name = read_series(args.solution_csv, "--solution-csv")
    require(len(t) >= 4, "--solution-csv", "need at least 4 samples")
    grid = Grid(float(t[0]), float(t[-1]), len(t))
    span = grid.t1 - grid.t0
    require(np.max(np.abs(t - grid.nodes)) <= 1e-9 * max(1.0, span), "--solution-csv", "time column is not a uniform grid")
    _, f = forcing_from_expr(args.f, grid, "--f")
    res = linear_residual(GridFunction(grid, u), CFOrder(args.alpha), args.lam, f)
    report = {
        "command": "verify",
        "n": grid.n,
        "residual_max_norm": res.max_norm(),
        "forcing_max_norm": f.max_norm(),
    }
    if args.out:
        write_series(Path(args.out), grid.nodes, res.values, "residual")
        report["out"] = args.out
    return report


def cmd_replay(args, argv, started) -> dict:
    try:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        stored = manifest["argv"]
    except (OSError, ValueError, KeyError, TypeError):
        raise ValidationError(f"manifest: cannot read a run manifest from {args.manifest}") from None
    require(bool(stored) and stored[0] != "replay", "manifest", "does not describe a solver run")
    return run(stored)


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfode", description="Caputo-Fabrizio fractional differential equation solvers")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-linear", help="closed-form solution of D^{1+alpha} u - lambda u = f")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--a", type=float, default=0.0, help="interval start (default 0)")
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--n", type=int, default=4001)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--f", help="forcing expression in t")
    src.add_argument("--f-csv", help="sampled forcing, CSV with header t,<name>")
    p.add_argument("--u0", type=float, default=0.0, help="u(a)")
    p.add_argument("--du0", type=float, default=0.0, help="u'(a)")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(handler=cmd_solve_linear)

    p = sub.add_parser("solve-nonlinear", help="Picard iteration for D^{1+alpha} u = phi(t, u)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--phi", required=True, help="expression in t and u")
    p.add_argument("--L1", type=float, required=True)
    p.add_argument("--L2", type=float, required=True)
    p.add_argument("--U0", type=float, default=0.0)
    p.add_argument("--U1", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--n", type=int, default=2001)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_solve_nonlinear)

    p = sub.add_parser("solve-msd", help="fractional mass-spring-damper motion")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--m", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--F", help="forcing expression in t")
    src.add_argument("--F-csv", help="sampled forcing, CSV with header t,<name>")
    p.add_argument("--x0", type=float, default=None, help="x(0); defaults to F(0)/k")
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--n", type=int, default=8001)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_solve_msd)

    p = sub.add_parser("verify", help="substitute a solution back into D^{1+alpha} u - lambda u = f")
    p.add_argument("--solution-csv", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--f", required=True, help="forcing expression in t")
    p.add_argument("--out", help="write the per-node residual here")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(handler=cmd_replay)
    return parser


def run(argv: list[str]) -> dict:
    args = build_parser().parse_args(argv)
    return args.handler(args, list(argv), time.perf_counter())


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        report = run(argv)
    except SystemExit as exc:
        # argparse: 2 on usage errors, 0 for --help/--version
        return int(exc.code or 0)
    except ValidationError as exc:
        print(f"cfode: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverFailure as exc:
        print(f"cfode: {exc}", file=sys.stderr)
        return exc.code
    except CFOdeError as exc:
        print(f"cfode: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"cfode: error: --out: cannot write {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_VALIDATION
    emit(report)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
