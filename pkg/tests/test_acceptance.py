"""Acceptance criteria, one test each.  Every test prints a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (about four minutes,
dominated by the 10^5-path Monte Carlo runs of criterion 5).
"""

import io
import json
import math
import time

import numpy as np
import pytest

from commongood.cli import run
from commongood.errors import AsymmetryError
from commongood.model import resolvent
from commongood.mpe import (build_asymmetric, build_symmetric, check_asymmetric_conditions,
                            critical_k2, regular_rate, steady_state)
from commongood.rdgame import RdParams, best_response_rd, symmetric_effort
from commongood.simulate import (NoControl, SimConfig, Singular, SymmetricRegular,
                                 estimate_payoff, simulate_payoffs)
from commongood.single_control import (make_solution, solve_single, solve_threshold,
                                       value_function, verify_optimality)

from conftest import make_scenario


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def test_criterion_01_threshold_stochastic(report):
    s = make_scenario()
    t0 = time.perf_counter()
    theta = solve_threshold(s)
    elapsed = time.perf_counter() - t0
    ok = abs(theta - -4.3605) <= 1e-3 and elapsed < 1.0
    report(1, ok, f"theta={theta:.6f} in {elapsed:.3f}s")


def test_criterion_02_threshold_deterministic(report):
    s = make_scenario(sigma=0.0)
    t0 = time.perf_counter()
    m = build_symmetric(s)
    eta = steady_state(m, s)
    elapsed = time.perf_counter() - t0
    ok = abs(m.theta - -4.0132) <= 1e-3 and abs(eta - -5.68646) <= 1e-3 and elapsed < 1.0
    report(2, ok, f"theta={m.theta:.6f} eta={eta:.6f} in {elapsed:.3f}s")


def test_criterion_03_smooth_pasting(report):
    s = make_scenario()
    sol = solve_single(s)
    rep = verify_optimality(sol, s)
    d1 = abs(float(value_function(sol, s, sol.theta, 1)) - sol.k)
    d2 = abs(float(value_function(sol, s, sol.theta, 2)))
    f1 = rep["smooth_pasting_first_fd"].max_violation
    f2 = rep["smooth_pasting_second_fd"].max_violation
    ok = d1 <= 1e-10 and d2 <= 1e-8 and f1 <= 1e-4 and f2 <= 1e-4
    report(3, ok, f"|V'-k|={d1:.1e} |V''|={d2:.1e} fd: {f1:.1e}, {f2:.1e}")


def test_criterion_04_optimality_certificate(report):
    s = make_scenario()
    sol = solve_single(s)
    grid = np.linspace(sol.theta - 15, sol.theta + 15, 3001)
    rep = verify_optimality(sol, s, grid)
    core = ("AV_plus_pi", "V_prime_minus_k", "complementarity")
    worst = max(rep[n].max_violation for n in core)
    bad_a = verify_optimality(make_solution(s, sol.theta, 1.1 * sol.a_coef), s, grid)
    bad_theta = verify_optimality(make_solution(s, sol.theta + 0.5), s, grid)
    flagged = [bad_a["smooth_pasting_first"].max_violation, bad_theta["AV_plus_pi"].max_violation]
    ok = worst <= 1e-6 and all(v >= 1e-3 for v in flagged)
    report(4, ok, f"max violation {worst:.1e}; perturbations flagged at "
                  f"{flagged[0]:.3g} (A*1.1), {flagged[1]:.3g} (theta+0.5)")


def test_criterion_05_monte_carlo(report):
    s1 = make_scenario()
    s2 = make_scenario(rho=2.0, x_c=-10.0)
    cfg = SimConfig(0.0, 1e-3, 25.0, n_paths=100_000, seed=2024)
    t0 = time.perf_counter()
    lines, ok = [], True

    est = estimate_payoff(s1, NoControl(), cfg)
    target = float(resolvent(s1, 0.0))
    ok &= abs(est.mean - target) <= 3 * est.std_error
    lines.append(f"(a) {est.mean:.5f} vs {target:.5f} se {est.std_error:.1e}")

    sol = solve_single(s1)
    est = estimate_payoff(s1, Singular(sol.theta), cfg)
    target = float(value_function(sol, s1, 0.0))
    ok &= abs(est.mean - target) <= 3 * est.std_error
    lines.append(f"(b) {est.mean:.5f} vs {target:.5f} se {est.std_error:.1e}")

    m = build_symmetric(s2)
    vals = simulate_payoffs(s2, SymmetricRegular(m), cfg)
    target = float(value_function(m.single, s2, 0.0))
    for i in range(2):
        mean = vals[:, i].mean()
        se = vals[:, i].std(ddof=1) / math.sqrt(len(vals))
        ok &= abs(mean - target) <= 3 * se
        lines.append(f"(c{i + 1}) {mean:.5f} vs {target:.5f} se {se:.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 600
    report(5, ok, "; ".join(lines) + f"; {elapsed:.0f}s")


def test_criterion_06_rate_continuity(report):
    s = make_scenario(rho=2.0, x_c=-10.0)
    m = build_symmetric(s)
    at_theta = float(regular_rate(m, s, m.theta - 1e-8))
    u6 = float(regular_rate(m, s, -6.0))
    ok = abs(at_theta) <= 1e-6 and abs(u6 - 0.7109) <= 1e-3
    report(6, ok, f"u(theta-)={at_theta:.1e} u(-6)={u6:.5f}")


def test_criterion_07_asymmetric_feasibility(report):
    s = make_scenario(rho=2.0, x_c=-10.0)
    t0 = time.perf_counter()
    rep = check_asymmetric_conditions(build_asymmetric(s, -6.0), s)
    v1, v2 = rep["U2prime"].max_violation, rep["AU2"].max_violation
    k2 = critical_k2(s, -6.0, 0.3, 1.0, 1e-3)
    elapsed = time.perf_counter() - t0
    ok = rep.passed and v1 <= 1e-8 and v2 <= 1e-8 and abs(k2 - 0.5383) <= 5e-3 and elapsed < 30
    report(7, ok, f"U2' {v1:.1e}, AU2 {v2:.1e}; critical k2={k2:.5f} in {elapsed:.2f}s")


def test_criterion_08_unequal_costs_refused(report):
    s = make_scenario(rho=2.0, x_c=-10.0)
    m = build_symmetric(s)
    uneven = s.with_k(1, 0.8)
    try:
        value = regular_rate(m, uneven, -6.0)
    except AsymmetryError as exc:
        report(8, True, f"refused: {exc}")
        return
    report(8, False, f"returned {value!r}")


def test_criterion_09_rd_game(report):
    rng = np.random.default_rng(99)
    worst_root = worst_fixed = 0.0
    for _ in range(50):
        p = RdParams(rng.uniform(0.5, 50), rng.uniform(0.01, 0.5), rng.uniform(0.1, 3),
                     rng.uniform(0.1, 3))
        lam = symmetric_effort(p).lambda_star
        a, b, c = 8 * p.k + 3 * p.c, 2 * (p.c + 4 * p.k) * p.r, -2 * (p.reward - p.k * p.r) * p.r
        oracle = max(0.0, max(np.roots([a, b, c]).real))
        worst_root = max(worst_root, abs(lam - oracle))
        worst_fixed = max(worst_fixed, abs(best_response_rd(p, lam) - lam))
    ref = symmetric_effort(RdParams(10, 0.1, 1, 1)).lambda_star
    ok = worst_root <= 1e-10 and worst_fixed <= 1e-10 and abs(ref - 0.38124) <= 1e-4
    report(9, ok, f"root err {worst_root:.1e}, fixed point {worst_fixed:.1e}, lambda*={ref:.6f}")


def _cli(*argv):
    out = io.StringIO()
    code = run(list(argv), out, io.StringIO())
    return code, out.getvalue()


def test_criterion_10_determinism(report, scenario_dir):
    ex1 = str(scenario_dir / "ex1.json")
    ex2 = str(scenario_dir / "ex2.json")
    runs = [
        ["simulate", "--scenario", ex1, "--policy", "none", "--z0", "0", "--dt", "0.001",
         "--t", "5", "--seed", "7", "--sigma-override", "0"],
        ["simulate", "--scenario", ex1, "--policy", "singular", "--z0", "-5", "--dt", "0.001",
         "--t", "5", "--seed", "7"],
        ["simulate", "--scenario", ex2, "--policy", "regular", "--z0", "0", "--dt", "0.001",
         "--t", "5", "--seed", "7"],
        ["simulate", "--scenario", ex2, "--policy", "asymmetric", "--theta-prime", "-6",
         "--z0", "-8", "--dt", "0.001", "--t", "5", "--seed", "7"],
    ]
    same = all(_cli(*a) == _cli(*a) for a in runs)
    pay = ["payoff", "--scenario", ex1, "--policy", "singular", "--z0", "0", "--dt", "0.01",
           "--t", "10", "--seed", "7", "--paths", "2000"]
    serial, parallel = _cli(*pay), _cli(*pay, "--workers", "2")
    ok = same and serial == parallel and serial[0] == 0
    report(10, ok, f"simulate CSV identical: {same}; payoff serial == 2 workers: "
                   f"{serial == parallel}")
