"""Command-line front end.

Every subcommand prints a single JSON document (or CSV for ``simulate``) on
stdout.  Exit status: 0 success, 1 invalid scenario or failed check, 2 usage
error or unreadable file.  Player numbers on the command line start at 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import (AssumptionError, AsymmetryError, BracketError, PreconditionError,
                     ScenarioError, SimulationError)
from .model import load_scenario, validate_scenario
from .mpe import (build_asymmetric, build_symmetric, check_asymmetric_conditions,
                  critical_k2, steady_state)
from .rdgame import RdParams, best_response_rd, payoff_rd, symmetric_effort
from .simulate import (Asymmetric, NoControl, SimConfig, Singular, SymmetricRegular,
                       estimate_payoff, simulate_path)
from .single_control import solve_single, verify_optimality

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _grid(text):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI:STEP, got {text!r}") from None
    if not (step > 0 and hi > lo):
        raise argparse.ArgumentTypeError("need HI > LO and STEP > 0")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def _pair(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a,b, got {text!r}") from None
    return a, b


def _player(text):
    i = int(text)
    if i < 1:
        raise argparse.ArgumentTypeError("players are numbered from 1")
    return i - 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="commongood", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--sigma-override", type=float, default=None,
                       help="replace the scenario's volatility (0 gives the deterministic limit)")
        return p

    p = scenario_cmd("solve", "single-controller threshold and value")
    p.add_argument("--player", type=_player, default=0)
    p.add_argument("--method", choices=("auto", "closed", "generic"), default="auto")

    p = scenario_cmd("mpe", "symmetric or asymmetric equilibrium")
    p.add_argument("--mode", choices=("symmetric", "asymmetric"), default="symmetric")
    p.add_argument("--n", type=int, default=None, help="number of players (symmetric mode)")
    p.add_argument("--theta-prime", type=float, default=None)

    for name, help in (("simulate", "simulate one path, CSV output"),
                       ("payoff", "Monte Carlo estimate of a player's payoff")):
        p = scenario_cmd(name, help)
        p.add_argument("--policy", choices=("none", "singular", "regular", "asymmetric"),
                       required=True)
        p.add_argument("--z0", type=float, required=True)
        p.add_argument("--dt", type=float, default=1e-3)
        p.add_argument("--t", type=float, default=25.0, help="horizon")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--theta-prime", type=float, default=None)
        p.add_argument("--controller", choices=("1", "2", "split"), default="1",
                       help="who pays for singular pushes")
        if name == "simulate":
            p.add_argument("--path-index", type=int, default=0)
            p.add_argument("--out", default=None, help="write CSV here instead of stdout")
        else:
            p.add_argument("--paths", type=int, default=10_000)
            p.add_argument("--player", type=_player, default=0)
            p.add_argument("--workers", type=int, default=1)

    p = scenario_cmd("verify", "certify the single-controller solution on a grid")
    p.add_argument("--grid", type=_grid, default=None, help="LO:HI:STEP, inclusive")
    p.add_argument("--player", type=_player, default=0)
    p.add_argument("--tol", type=float, default=1e-6)

    p = scenario_cmd("sweep-k2", "bisect for the smallest k2 supporting the asymmetric profile")
    p.add_argument("--theta-prime", type=float, required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--out", default=None, help="CSV of every evaluated k2")

    p = sub.add_parser("rd", help="symmetric R&D effort")
    p.add_argument("--reward", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--lambda0", type=_pair, default=(0.0, 0.0))
    return ap


def _load(args):
    path = Path(args.scenario)
    if not path.is_file():
        raise UsageError(f"scenario file not found: {args.scenario}")
    s = load_scenario(path)
    if args.sigma_override is not None:
        s = s.with_sigma(args.sigma_override)
    validate_scenario(s).raise_for_failure()
    return s


def _emit(obj, out):
    out.write(json.dumps(obj, indent=2) + "\n")


def _policy(args, s):
    if args.policy == "none":
        return NoControl()
    if args.policy == "singular":
        who = None if args.controller == "split" else int(args.controller) - 1
        return Singular(solve_single(s, 0 if who is None else who).theta, who)
    if args.policy == "regular":
        return SymmetricRegular(build_symmetric(s))
    if args.theta_prime is None:
        raise UsageError("--theta-prime is required for the asymmetric policy")
    return Asymmetric(build_asymmetric(s, args.theta_prime))


def cmd_solve(args, out):
    s = _load(args)
    sol = solve_single(s, args.player, args.method)
    _emit({"theta": sol.theta, "A": sol.a_coef, "V_theta": sol.v_theta,
           "player": args.player + 1}, out)


def cmd_mpe(args, out):
    s = _load(args)
    if args.mode == "symmetric":
        m = build_symmetric(s, args.n)
        res = {"mode": "symmetric", "n_players": m.n_players, "theta": m.theta,
               "A": m.single.a_coef, "V_theta": m.single.v_theta}
        if s.sigma == 0.0:
            res["steady_state"] = steady_state(m, s)
        _emit(res, out)
        return EXIT_OK
    if args.theta_prime is None:
        raise UsageError("--theta-prime is required in asymmetric mode")
    m = build_asymmetric(s, args.theta_prime)
    rep = check_asymmetric_conditions(m, s)
    _emit({"mode": "asymmetric", "theta_prime": m.theta_prime, "theta_1": m.theta_1,
           "B": m.b_coef, "U2_theta1": m.u2_at_theta1, "passed": rep.passed,
           "conditions": rep.to_dict()}, out)
    return EXIT_OK if rep.passed else EXIT_INVALID


def cmd_simulate(args, out):
    s = _load(args)
    cfg = SimConfig(args.z0, args.dt, args.t, 1, args.seed)
    rec = simulate_path(s, _policy(args, s), cfg, args.path_index)
    text = rec.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        out.write(text)


def cmd_payoff(args, out):
    s = _load(args)
    cfg = SimConfig(args.z0, args.dt, args.t, args.paths, args.seed)
    est = estimate_payoff(s, _policy(args, s), cfg, args.player, args.workers)
    _emit(est.to_dict(), out)


def cmd_verify(args, out):
    s = _load(args)
    sol = solve_single(s, args.player)
    rep = verify_optimality(sol, s, args.grid, args.tol)
    _emit({"theta": sol.theta, "passed": rep.passed, "conditions": rep.to_dict()}, out)
    return EXIT_OK if rep.passed else EXIT_INVALID


def cmd_sweep(args, out):
    s = _load(args)
    record = []
    k2 = critical_k2(s, args.theta_prime, args.lo, args.hi, args.tol, record)
    if args.out:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k2", "passed", "max_violation_U2prime", "max_violation_AU2"])
        for k, ok, rep in sorted(record, key=lambda t: t[0]):
            w.writerow([format(k, ".17g"), int(ok), format(rep["U2prime"].max_violation, ".17g"),
                        format(rep["AU2"].max_violation, ".17g")])
        Path(args.out).write_text(buf.getvalue())
    _emit({"critical_k2": k2, "theta_prime": args.theta_prime, "tol": args.tol,
           "evaluations": len(record)}, out)


def cmd_rd(args, out):
    p = RdParams(args.reward, args.r, args.k, args.c, args.lambda0)
    sol = symmetric_effort(p)
    lam = sol.lambda_star
    init = p.lambda0[0]
    res = {"lambda_star": lam, "positive_effort": sol.positive_effort,
           "payoff_at_eq": payoff_rd(p, max(lam, init), max(lam, p.lambda0[1]), init),
           "br_check_residual": abs(best_response_rd(p, lam) - lam)}
    _emit(res, out)


COMMANDS = {"solve": cmd_solve, "mpe": cmd_mpe, "simulate": cmd_simulate,
            "payoff": cmd_payoff, "verify": cmd_verify, "sweep-k2": cmd_sweep, "rd": cmd_rd}


def run(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        code = COMMANDS[args.command](args, out)
    except UsageError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        err.write(f"error: cannot access {exc.filename}: {exc.strerror}\n")
        return EXIT_USAGE
    except AssumptionError as exc:
        err.write(f"assumption violated: {exc}\n")
        return EXIT_INVALID
    except (ScenarioError, AsymmetryError, PreconditionError, BracketError,
            SimulationError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INVALID
    return EXIT_OK if code is None else code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
