"""Command-line interface.

    cutfrac run       --example 1 --n 32
    cutfrac converge  --example 2 --levels 5 --n0 8
    cutfrac sweep     --offsets 0.5,1e-4,1e-8
    cutfrac example 3 > ex3.json

Exit codes: 0 success, 1 numerical failure, 2 usage or input error. Every
failure writes one line of JSON to standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import reporting
from .analysis import DEFAULT_OFFSETS, compute_errors, cut_robustness_sweep, residual_oracle, run_convergence, solve_case
from .cases import get_case
from .errors import CutFracError, GeometryError, MissingExact, OracleFailed, SolverError
from .problem import ProblemError, build_case, example_problem, load_problem


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    p = _Parser(prog="cutfrac", description="Cut finite elements for Darcy flow with embedded fractures.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, levels=False):
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--example", type=int, choices=(1, 2, 3))
        src.add_argument("--problem", type=Path, help="problem JSON file")
        sp.add_argument("--beta", type=float)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--beta-gamma", type=float)
        sp.add_argument("--a-gamma", type=_float_list, help="per-edge fracture permeabilities, comma separated")
        sp.add_argument("--out", type=Path, default=Path("runs"))
        sp.add_argument("--deterministic", action="store_true", help="fixed output directory name, no timestamps")
        if levels:
            sp.add_argument("--n0", type=int)
            sp.add_argument("--levels", type=int)
        else:
            sp.add_argument("--n", type=int)

    common(sub.add_parser("run", help="assemble and solve once"))
    common(sub.add_parser("converge", help="convergence study with fitted rates"), levels=True)
    sw = sub.add_parser("sweep", help="condition numbers versus cut position")
    sw.add_argument("--offsets", type=_float_list, default=list(DEFAULT_OFFSETS))
    sw.add_argument("--n", type=int, default=32)
    sw.add_argument("--gamma", type=float, default=0.1)
    sw.add_argument("--out", type=Path, default=Path("runs"))
    sw.add_argument("--deterministic", action="store_true")
    ex = sub.add_parser("example", help="print the problem file of a benchmark")
    ex.add_argument("k", type=int, choices=(1, 2, 3))
    return p


def _load(args):
    if args.problem is not None:
        try:
            data = load_problem(args.problem)
        except OSError as exc:
            raise ProblemError(f"cannot read {args.problem}: {exc.strerror}") from None
        case, params = build_case(data)
    else:
        case, params = get_case(args.example), {}
    if args.a_gamma is not None:
        n_edges = len(case.graph.edges)
        if len(args.a_gamma) != n_edges:
            raise UsageError(f"--a-gamma needs {n_edges} values, got {len(args.a_gamma)}")
    case = case.with_overrides(
        beta=args.beta if args.beta is not None else params.get("beta"),
        gamma=args.gamma if args.gamma is not None else params.get("gamma"),
        beta_gamma=args.beta_gamma if args.beta_gamma is not None else params.get("beta_gamma"),
        a_gamma=args.a_gamma,
    )
    return case, params


def _outdir(args, name):
    stamp = "deterministic" if args.deterministic else time.strftime("%Y%m%dT%H%M%S")
    d = args.out / name / stamp
    d.mkdir(parents=True, exist_ok=True)
    return d


def _parameters(case):
    m = case.model
    return {"beta": m.beta, "gamma": m.gamma, "beta_gamma": m.beta_gamma,
            "a": list(m.a), "a_gamma": [e.a_gamma for e in case.graph.edges]}


def cmd_run(args):
    case, params = _load(args)
    n = args.n or params.get("n", 32)
    run = solve_case(case, n)
    out = _outdir(args, case.name)
    summary = {"case": case.name, "n": n, "h": run.h, "ndof": run.ndof, "method": run.report.method,
               "iterations": run.report.iterations, "residual": run.report.residual_norm,
               "parameters": _parameters(case)}
    if case.exact is not None:
        errs = compute_errors(run.field, case, run.topo)
        summary.update(err_L2_bulk=errs.l2_bulk, err_L2_gamma=errs.l2_gamma, err_energy=errs.energy)
    reporting.write_json(summary, out / "summary.json")
    reporting.write_solution_csv(run.field, case.domain, out / "solution.csv")
    print(json.dumps(reporting._jsonable(summary), sort_keys=True))
    return 0


def cmd_converge(args):
    case, params = _load(args)
    if case.exact is None:
        raise MissingExact(f"{case.name} has no closed-form solution; use 'run' instead")
    levels = args.levels or params.get("levels", 5)
    n0 = args.n0 or params.get("n0", 8)
    if levels < 3:
        raise UsageError("--levels must be at least 3")
    oracle = residual_oracle(case, seed=params.get("seed", 0))
    report = run_convergence(case, levels, n0, check_oracle=False)
    out = _outdir(args, case.name)
    reporting.write_convergence_csv(report, out / "convergence.csv")
    reporting.write_convergence_json(report, out / "convergence.json")
    (out / "plot.gp").write_text(reporting.gnuplot_script(report))
    summary = {"case": case.name, "levels": levels, "n0": n0, "parameters": _parameters(case),
               "oracle_max_residual": oracle.max_residual,
               "rates": {k: v.slope for k, v in report.rates.items()},
               "r_squared": {k: v.r_squared for k, v in report.rates.items()}}
    reporting.write_json(summary, out / "summary.json")
    for name, fit in report.rates.items():
        print(f"{name:14s} rate {fit.slope:6.3f}  R^2 {fit.r_squared:.4f}")
    return 0


def cmd_sweep(args):
    if not args.offsets:
        raise UsageError("--offsets must list at least one value")
    if any(not 0 < x < 1 for x in args.offsets):
        raise UsageError("offsets must lie strictly between 0 and 1")
    rows = cut_robustness_sweep(args.offsets, n=args.n, gamma=args.gamma)
    out = _outdir(args, "sweep")
    reporting.write_sweep_csv(rows, out / "sweep.csv")
    for r in rows:
        print(f"{r.offset:9.1e}  {r.cond_stabilized:12.4e}  {r.cond_unstabilized:12.4e}")
    return 0


def cmd_example(args):
    print(json.dumps(example_problem(args.k), indent=2, sort_keys=True))
    return 0


COMMANDS = {"run": cmd_run, "converge": cmd_converge, "sweep": cmd_sweep, "example": cmd_example}


def _fail(code, kind, message, **extra):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message), **extra}, sort_keys=True) + "\n")
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(2, "usage", exc)
    except ProblemError as exc:
        return _fail(2, "problem", exc, **exc.details)
    except (GeometryError, MissingExact) as exc:
        return _fail(2, type(exc).__name__, exc)
    except OracleFailed as exc:
        return _fail(1, "OracleFailed", exc, equation=exc.equation, point=list(exc.point))
    except (SolverError, CutFracError, ArithmeticError, ValueError) as exc:
        return _fail(1, type(exc).__name__, exc)


if __name__ == "__main__":
    sys.exit(main())
