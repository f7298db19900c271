"""Command-line interface: ``singlq validate | solve | sweep | example-tracking``.

Exit codes: 0 success, 2 failed assumptions (argparse usage errors also
exit with 2), 3 solver failure, 4 unreadable problem file, 1 I/O error.
"""

import argparse
import json
import os
import sys

import numpy as np

from .cheap_solver import cheap_feedback, solve_pccp
from .examples import tracking_from_nominal, tracking_problem
from .exceptions import ParseError, SinglqError
from .problem_file import load_problem, save_problem
from .problem_model import RawProblem, validate_oocp, validate_raw, validate_reduced
from .reduced_solver import minimizing_feedback_1, solve_reduced
from .simulation import write_trajectory_csv
from .state_transform import build_transform, transform_problem
from .sweep import DEFAULT_EPSILONS, SweepReport, run_sweep

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_SOLVER = 3
EXIT_PARSE = 4


class CliFailure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _mat(M):
    return [[float(x) for x in row] for row in np.atleast_2d(np.asarray(M, dtype=float))]


def _modes(sig):
    return sig.to_json()


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _assumptions(problem):
    """Full (A1)-(A7) report and the transformed problem (``None`` if unavailable)."""
    if isinstance(problem, RawProblem):
        report = validate_raw(problem)
        if not report.all_pass:
            return report, None
        try:
            o = transform_problem(problem)
        except SinglqError as exc:
            raise CliFailure(EXIT_INVALID, f"state transformation failed: {exc}")
        return report.merge(validate_reduced(o)), o
    return validate_oocp(problem), problem


def _load_valid(path):
    problem = load_problem(path)
    report, o = _assumptions(problem)
    if not report.all_pass:
        raise CliFailure(EXIT_INVALID, "assumptions violated:\n" + report.render())
    return problem, o


def _fmt_eps(e):
    return f"{e:.6g}"


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_validate(args):
    problem = load_problem(args.file)
    report, _ = _assumptions(problem)
    if args.json:
        sys.stdout.write(_dumps(report.to_json()))
    else:
        print(report.render())
    return EXIT_OK if report.all_pass else EXIT_INVALID


def solution_bundle(problem, o, epsilon):
    """JSON-ready dict with the exact and zero-order solutions at ``epsilon``."""
    rs = solve_reduced(o)
    sol = solve_pccp(o, epsilon, reduced=rs)
    P1, P2, P3 = sol.blocks
    law = cheap_feedback(sol, o)
    u1 = minimizing_feedback_1(rs, o, epsilon)
    bundle = {
        "epsilon": float(epsilon),
        "cheap": {
            "P": _mat(sol.P), "P1": _mat(P1), "P2": _mat(P2), "P3": _mat(P3),
            "closed_loop": _mat(sol.Acl), "h": _modes(sol.h), "s": _modes(sol.s),
            "Jstar": sol.Jstar, "gain": _mat(law.gain), "feedforward": _modes(law.feedforward),
        },
        "reduced": {
            "P10": _mat(rs.P10), "P20": _mat(rs.P20), "P30": _mat(rs.P30),
            "S0": _mat(rs.S0), "Bbar": _mat(rs.Bbar), "Theta": _mat(rs.Theta),
            "Acl0": _mat(rs.Acl0), "h10": _modes(rs.h10), "h20": _modes(rs.h20),
            "s0": _modes(rs.s0), "Jbar": rs.Jbar, "alpha": rs.alpha, "mu": rs.mu,
        },
        "minimizing_1": {"gain": _mat(u1.gain), "feedforward": _modes(u1.feedforward)},
    }
    if isinstance(problem, RawProblem):
        td = build_transform(problem)
        bundle["transform"] = {"T": _mat(td.T), "Tinv": _mat(td.Tinv),
                               "lifted_gain": _mat(law.gain @ td.Tinv)}
    return bundle, sol, rs


def cmd_solve(args):
    problem, o = _load_valid(args.file)
    bundle, sol, rs = solution_bundle(problem, o, args.epsilon)
    text = _dumps(bundle)
    if args.out:
        _write(args.out, text)
    if args.json:
        sys.stdout.write(text)
    else:
        print(f"epsilon = {_fmt_eps(args.epsilon)}")
        print(f"J*_eps  = {sol.Jstar:.12g}")
        print(f"Jbar    = {rs.Jbar:.12g}")
        print("optimal gain -(G+E)^{-1}B'P:")
        print(np.array2string(np.asarray(bundle["cheap"]["gain"]), precision=8))
        if args.out:
            print(f"solution bundle written to {args.out}")
    return EXIT_OK


PLOT_SCRIPT = '''"""Plots for a singlq sweep directory: run ``python plot_sweep.py`` inside it."""
import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def number(x):
    try:
        return float(x)
    except ValueError:
        return float("nan")


def read(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {k: [number(r[k]) for r in rows] for k in rows[0]} if rows else {}


sweep = read(os.path.join(here, "sweep.csv"))
fig, ax = plt.subplots()
ax.plot(sweep["epsilon"], sweep["Jstar"], "o-", label="J*_eps")
ax.plot(sweep["epsilon"], sweep["J_u1"], "s-", label="J(u_eps,1)")
ax.plot(sweep["epsilon"], sweep["J_u2"], "^-", label="J(u_eps,2)")
ax.axhline(JBAR, color="k", ls="--", label="Jbar")
ax.set_xlabel("epsilon")
ax.set_ylabel("cost")
ax.legend()
fig.savefig(os.path.join(here, "cost_vs_epsilon.png"), dpi=150)

files = sorted(glob.glob(os.path.join(here, "trajectory_u1_eps*.csv")))
columns = [c for c in read(files[0]) if c.startswith(("z_", "u_"))] if files else []
for col in columns:
    fig, ax = plt.subplots()
    for path in files:
        data = read(path)
        label = os.path.basename(path)[len("trajectory_u1_eps"):-4]
        ax.plot(data["t"], data[col], label="eps=" + label)
    ax.set_xlabel("t")
    ax.set_ylabel(col)
    ax.legend()
    fig.savefig(os.path.join(here, col + ".png"), dpi=150)
'''


def _sweep_text(report):
    lines = [f"Jbar = {report.Jbar:.12g}   mu = {report.mu:.6g}",
             f"{'eps':>8} {'J*_eps':>14} {'J(u1)':>14} {'J(u2)':>14} {'eps*max|u_lo|':>12}  status"]
    for r in report.rows:
        lines.append(f"{r.epsilon:>8.4g} {r.Jstar:>14.9g} {r.J_u1:>14.9g} {r.J_u2:>14.9g} "
                     f"{r.epsilon * r.u1_lower_max:>12.6g}  {r.status}")
    lines.append("ratio diagnostics:")
    for d in report.diagnostics:
        lines.append(f"  {'PASS' if d.passed else 'FAIL'}  {d.name:<28} spread={d.spread:.3g}"
                     + (f"  ({d.note})" if d.note else ""))
    return "\n".join(lines)


def write_sweep(report, out):
    """Write ``sweep.json``, ``sweep.csv``, trajectory CSVs and ``plot_sweep.py``."""
    os.makedirs(out, exist_ok=True)
    _write(os.path.join(out, "sweep.json"), _dumps(report.to_json()))
    header = ",".join(SweepReport.CSV_COLUMNS)
    lines = [header]
    for row in report.csv_rows():
        lines.append(",".join(x if isinstance(x, str) else f"{x:.17g}" for x in row))
    _write(os.path.join(out, "sweep.csv"), "\n".join(lines) + "\n")
    for r in report.rows:
        for key, traj in r.trajectories.items():
            write_trajectory_csv(os.path.join(out, f"trajectory_{key}_eps{_fmt_eps(r.epsilon)}.csv"),
                                 traj)
    _write(os.path.join(out, "plot_sweep.py"), PLOT_SCRIPT.replace("JBAR", repr(report.Jbar)))


def _parse_eps(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if len(set(vals)) < 2:
        raise argparse.ArgumentTypeError("a sweep needs at least two distinct epsilon values")
    if any(not 0 < v <= 1 for v in vals):
        raise argparse.ArgumentTypeError("epsilon values must lie in (0, 1]")
    return tuple(vals)


def _run_sweep(o, args, out):
    report = run_sweep(o, epsilons=args.epsilons, tol=args.tol, horizon=args.horizon,
                       keep=out is not None)
    if out:
        write_sweep(report, out)
    return report


def cmd_sweep(args):
    _, o = _load_valid(args.file)
    report = _run_sweep(o, args, args.out)
    if args.json:
        sys.stdout.write(_dumps(report.to_json()))
    else:
        print(_sweep_text(report))
    return EXIT_OK if all(r.status == "ok" for r in report.rows) else EXIT_SOLVER


def cmd_example_tracking(args):
    if args.nominal is not None:
        at1, at2, gamma, xt0, yt0 = args.nominal
        o = tracking_from_nominal(at1, at2, gamma, xt0, yt0, args.d1, args.d2)
    else:
        o = tracking_problem(d1=args.d1, d2=args.d2)
    out = args.out
    os.makedirs(out, exist_ok=True)
    save_problem(o, os.path.join(out, "problem.json"))
    report = _run_sweep(o, args, out)
    rs = solve_reduced(o)
    summary = {
        "Jbar": rs.Jbar,
        "P10": _mat(rs.P10), "P20": _mat(rs.P20), "P30": _mat(rs.P30), "Acl0": _mat(rs.Acl0),
        "h10_0": [float(x) for x in rs.h10(0.0)],
        "h20_0": [float(x) for x in rs.h20(0.0)],
        "s0_0": float(rs.s0(0.0)[0]),
        "mu": rs.mu,
        "epsilons": list(report.epsilons),
        "Jstar": [r.Jstar for r in report.rows],
        "J_u1": [r.J_u1 for r in report.rows],
        "J_u2": [r.J_u2 for r in report.rows],
        "diagnostics_pass": report.all_pass,
    }
    _write(os.path.join(out, "summary.json"), _dumps(summary))
    if args.json:
        sys.stdout.write(_dumps(summary))
    else:
        print(_sweep_text(report))
        print(f"outputs written to {out}")
    return EXIT_OK if all(r.status == "ok" for r in report.rows) else EXIT_SOLVER


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _nominal(text):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        vals = ()
    if len(vals) != 5:
        raise argparse.ArgumentTypeError("expected AT1,AT2,GAMMA,XT0,YT0")
    return vals


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=argparse.SUPPRESS,
                        help="integration tolerance (default 1e-9)")
    common.add_argument("--horizon", type=float, default=argparse.SUPPRESS,
                        help="simulation horizon (default: chosen from decay rates)")
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                        help="machine-readable output on stdout")

    parser = argparse.ArgumentParser(prog="singlq", parents=[common],
                                     description="Singular LQ problems via partial cheap control.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check assumptions A1-A7")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", parents=[common], help="solve at one epsilon")
    p.add_argument("file")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--out", help="write the JSON solution bundle here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common], help="epsilon sweep with diagnostics")
    p.add_argument("file")
    p.add_argument("--epsilons", type=_parse_eps, default=DEFAULT_EPSILONS,
                   help="comma-separated list (default 0.2,0.1,0.05,0.025)")
    p.add_argument("--out", help="directory for JSON, CSV and plot script")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("example-tracking", parents=[common],
                       help="built-in double-integrator tracking example")
    p.add_argument("--out", default="tracking_example")
    p.add_argument("--epsilons", type=_parse_eps, default=DEFAULT_EPSILONS)
    p.add_argument("--nominal", type=_nominal, default=None,
                   help="nominal-path data AT1,AT2,GAMMA,XT0,YT0 (default: direct data)")
    p.add_argument("--d1", type=float, default=2.0)
    p.add_argument("--d2", type=float, default=1.0)
    p.set_defaults(func=cmd_example_tracking)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("tol", 1e-9), ("horizon", None), ("json", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if args.command == "solve" and not 0 < args.epsilon <= 1:
        parser.error("--epsilon must lie in (0, 1]")
    try:
        return args.func(args)
    except CliFailure as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (SinglqError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
