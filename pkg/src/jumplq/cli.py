"""Batch command-line front door.

Commands: validate, solve, value, simulate, verify.  Exit codes are stable
contracts: 0 success, 2 validation errors, 3 parse/schema errors,
4 closed-loop unsolvable, 5 numerical failure, 6 verification failure.
Output files are byte-reproducible for fixed inputs: floats are written with
shortest round-trip formatting, CSV uses LF line endings.
"""

import argparse
import json
import os
import sys

import numpy as np

from .errors import (ClosedLoopUnsolvable, NumericalFailure, OutOfHorizon,
                     ProblemFormatError, ProblemValidationError, RegularityViolation)
from .feedforward import closed_loop_strategy, solve_adjoint, value_terms
from .noise import NoisePlan
from .problem import load_problem, validate, with_steps
from .riccati import DEFAULT_TOL_PSD, DEFAULT_TOL_RANGE, solve_riccati
from .simulate import simulate_closed_loop
from .verify import path_costs, run_verification


def _fmt(x):
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _grid_rows(times, values):
    # One row per grid point: k, t, then the value entries in row-major order.
    for k, t in enumerate(times):
        yield [str(k), _fmt(t)] + [_fmt(x) for x in np.asarray(values[k]).reshape(-1)]


def _entry_names(tag, shape):
    if len(shape) == 1:
        return [f"{tag}_{i}" for i in range(shape[0])]
    return [f"{tag}_{i}_{j}" for i in range(shape[0]) for j in range(shape[1])]


def _load_theta_csv(path, steps, m, n):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise ProblemFormatError(f"cannot read {path}: {exc}") from exc
    rows = lines[1:]  # header
    if len(rows) != steps + 1:
        raise ProblemFormatError(f"gain override: {len(rows)} rows for {steps + 1} grid points")
    theta = np.empty((steps + 1, m, n))
    for row in rows:
        parts = row.split(",")
        if len(parts) != 2 + m * n:
            raise ProblemFormatError(f"gain override: expected {2 + m * n} columns, got {len(parts)}")
        try:
            k = int(parts[0])
            vals = [float(p) for p in parts[2:]]
        except ValueError as exc:
            raise ProblemFormatError(f"gain override: {exc}") from exc
        if not 0 <= k <= steps:
            raise ProblemFormatError(f"gain override: row index {k} outside 0..{steps}")
        theta[k] = np.asarray(vals).reshape(m, n)
    return theta


def _load(args):
    spec = load_problem(args.problem)
    if getattr(args, "steps", None):
        spec = with_steps(spec, args.steps)
    return validate(spec)


def _solve_chain(prob, args):
    ride = solve_riccati(prob, tol_psd=args.tol_psd, tol_range=args.tol_range)
    adj = solve_adjoint(prob, ride, tol_range=args.tol_range)
    strat = closed_loop_strategy(prob, ride, adj)
    return ride, adj, strat


def _outdir(args):
    out = getattr(args, "out", ".") or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_validate(args):
    prob = _load(args)
    print(f"ok: n={prob.n} m={prob.m} marks={prob.K} steps={prob.grid.steps} "
          f"horizon=[{prob.grid.t0:g}, {prob.grid.T:g}]")
    return 0


def cmd_solve(args):
    prob = _load(args)
    ride, adj, strat = _solve_chain(prob, args)
    out = _outdir(args)
    times = prob.times
    _write_csv(os.path.join(out, "P.csv"),
               ["k", "t"] + _entry_names("P", (prob.n, prob.n)), _grid_rows(times, ride.P))
    _write_csv(os.path.join(out, "Theta.csv"),
               ["k", "t"] + _entry_names("Theta", (prob.m, prob.n)), _grid_rows(times, strat.theta))
    _write_csv(os.path.join(out, "eta.csv"),
               ["k", "t"] + _entry_names("eta", (prob.n,)), _grid_rows(times, adj.eta))
    _write_csv(os.path.join(out, "v.csv"),
               ["k", "t"] + _entry_names("v", (prob.m,)), _grid_rows(times, strat.v))
    _write_json(os.path.join(out, "solve.json"), {
        "steps": prob.grid.steps, "t0": prob.grid.t0, "T": prob.grid.T,
        "certificates": {"psd_ok": bool(np.all(ride.psd_ok)), "range_ok": bool(np.all(ride.range_ok)),
                         "feedforward_range_ok": bool(np.all(adj.range_ok))},
        "theta_l2_norm": float(ride.theta_l2[0]),
        "P_t0": ride.P[0].tolist(),
    })
    print(f"solved: steps={prob.grid.steps} theta_l2={ride.theta_l2[0]:.6g}")
    return 0


def cmd_value(args):
    prob = _load(args)
    ride, adj, _ = _solve_chain(prob, args)
    if args.x is None:
        x = prob.x0
    else:
        try:
            x = np.asarray([float(s) for s in args.x.split(",")], dtype=float)
        except ValueError:
            print(f"invalid: --x must be comma-separated numbers, got {args.x!r}", file=sys.stderr)
            return 2
        if x.shape != (prob.n,):
            print(f"invalid: --x has {x.shape[0]} entries, state dimension is {prob.n}", file=sys.stderr)
            return 2
    terms = value_terms(prob, ride, adj, prob.grid.t0, x)
    value = terms["quadratic"] + terms["linear"] + terms["integral"]
    _write_json(os.path.join(_outdir(args), "value.json"), {
        "t": prob.grid.t0, "x": x.tolist(), "value": value,
        "quadratic": terms["quadratic"], "linear": terms["linear"], "integral": terms["integral"],
    })
    print(f"V(t0, x) = {value:.12g}")
    return 0


def cmd_simulate(args):
    prob = _load(args)
    _, _, strat = _solve_chain(prob, args)
    plan = NoisePlan(seed=args.seed, paths=args.paths)
    batch = simulate_closed_loop(prob, strat, plan)
    costs = path_costs(batch, prob)
    out = _outdir(args)

    keep = batch.paths if args.traj_paths is None else min(args.traj_paths, batch.paths)
    times = prob.times

    def traj_rows():
        for p in range(keep):
            for k, t in enumerate(times):
                yield [str(p), str(k), _fmt(t)] + [_fmt(x) for x in batch.X[p, k]]

    _write_csv(os.path.join(out, "trajectories.csv"),
               ["path", "k", "t"] + _entry_names("x", (prob.n,)), traj_rows())
    _write_csv(os.path.join(out, "costs.csv"), ["path", "cost"],
               ([str(p), _fmt(c)] for p, c in enumerate(costs)))
    mean = float(np.mean(costs))
    se = float(np.std(costs, ddof=1) / np.sqrt(len(costs))) if len(costs) > 1 else 0.0
    print(f"simulated: paths={batch.paths} steps={prob.grid.steps} cost mean={mean:.10g} se={se:.4g}")
    return 0


def cmd_verify(args):
    prob = _load(args)
    theta_override = None
    if args.theta_csv:
        theta_override = _load_theta_csv(args.theta_csv, prob.grid.steps, prob.m, prob.n)
    report, ok = run_verification(prob, seed=args.seed, paths=args.paths,
                                  tol_psd=args.tol_psd, tol_range=args.tol_range,
                                  theta_override=theta_override)
    _write_json(os.path.join(_outdir(args), "verify.json"), report)
    for check in report["checks"]:
        status = "PASS" if check["pass"] else "FAIL"
        print(f"{status} {check['name']}: lhs={check['lhs']:.6g} rhs={check['rhs']:.6g} "
              f"gap={check['gap']:.3g} tol={check['tolerance']:.3g}")
    if not ok:
        failing = [c["name"] for c in report["checks"] if not c["pass"]]
        print(f"verification failed: {', '.join(failing)}", file=sys.stderr)
        return 6
    print("verification passed")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="jumplq",
                                     description="Finite-horizon stochastic LQ control with Poisson jumps: "
                                                 "solve, evaluate, simulate, verify.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, steps=True, tols=False, mc=False, out=False):
        p.add_argument("--problem", required=True, help="problem JSON file")
        if steps:
            p.add_argument("--steps", type=int, default=None, help="override the grid step count")
        if tols:
            p.add_argument("--tol-psd", type=float, default=DEFAULT_TOL_PSD,
                           help="relative tolerance for the positive-semidefiniteness gate")
            p.add_argument("--tol-range", type=float, default=DEFAULT_TOL_RANGE,
                           help="relative tolerance for the range-inclusion gates")
        if mc:
            p.add_argument("--seed", type=int, default=0, help="master seed for the noise plan")
            p.add_argument("--paths", type=int, default=10000, help="number of Monte Carlo paths")
        if out:
            p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("validate", help="check a problem file and report every violation")
    add_common(p, steps=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="synthesize the optimal strategy and write it out")
    add_common(p, tols=True, out=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("value", help="evaluate the optimal value at the initial time")
    add_common(p, tols=True, out=True)
    p.add_argument("--x", default=None, help="comma-separated state, default the problem's x0")
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("simulate", help="simulate the closed-loop system and write trajectories/costs")
    add_common(p, tols=True, mc=True, out=True)
    p.add_argument("--traj-paths", type=int, default=None,
                   help="cap on paths written to trajectories.csv (costs.csv always has all)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the full verification suite against the problem")
    add_common(p, tols=True, mc=True, out=True)
    p.add_argument("--theta-csv", default=None,
                   help="override the feedback gain with a Theta.csv-format file")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ProblemFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ProblemValidationError as exc:
        for line in exc.errors:
            print(f"invalid: {line}", file=sys.stderr)
        return 2
    except (ClosedLoopUnsolvable, RegularityViolation) as exc:
        print(f"unsolvable: {exc}", file=sys.stderr)
        return 4
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 5
    except OutOfHorizon as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
