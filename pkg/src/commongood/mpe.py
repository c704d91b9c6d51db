"""Markov perfect equilibria of the contribution game.

Symmetric players: both contribute at a finite rate u(Z) below the
single-controller threshold theta, and each earns the single-controller value
V.  With N players the rate is split over the N - 1 opponents.

Asymmetric profile: player 1 lifts the state from [theta', theta_1] up to
theta_1 (singular control, reflecting at theta_1), both players contribute at
finite rates below theta'.  Whether this is an equilibrium depends on two grid
conditions on player 2's payoff, checked by :func:`check_asymmetric_conditions`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import AsymmetryError, BracketError, PreconditionError
from .model import Scenario, fundamental_solutions, resolvent
from .report import ConditionReport
from .single_control import SingleSolution, solve_single, solve_threshold, value_function

SYMMETRY_TOL = 1e-9
CONDITION_TOL = 1e-8
KINK_OFFSET = 1e-6
STEADY_BRACKET = 40.0
GROWTH_SLACK = 0.5  # affine offsets bend the log-log slope away from 1


@dataclass(frozen=True)
class SymmetricMpe:
    single: SingleSolution
    n_players: int = 2

    @property
    def theta(self) -> float:
        return self.single.theta


def _require_symmetric(s: Scenario):
    if s.n_players < 2:
        raise PreconditionError("a game needs at least two players")
    thetas = [solve_threshold(s, i) for i in range(s.n_players)]
    spread = max(thetas) - min(thetas)
    if spread > SYMMETRY_TOL:
        raise AsymmetryError(
            "no regular-control MPE exists under asymmetry: thresholds "
            + ", ".join(f"{t:.10g}" for t in thetas))
    same_profit = all(s.profit_of(i) == s.profit_of(0) for i in range(s.n_players))
    same_k = all(s.k(i) == s.k(0) for i in range(s.n_players))
    if not (same_profit and same_k):
        # equal thresholds under different primitives: payoffs differ, so the
        # shared-value construction below does not apply
        raise AsymmetryError("players share a threshold but differ in (k, profit); "
                             "the symmetric construction needs identical players")


def build_symmetric(s: Scenario, n_players=None) -> SymmetricMpe:
    """Regular-control equilibrium for identical players.

    Raises AsymmetryError when the players' thresholds differ.
    """
    _require_symmetric(s)
    n = s.n_players if n_players is None else int(n_players)
    if n < 2:
        raise PreconditionError("n_players must be >= 2")
    return SymmetricMpe(solve_single(s, 0), n)


def regular_rate(m: SymmetricMpe, s: Scenario, x):
    """Each player's contribution rate: -(A V + pi) / (k (N - 1)) below theta, else 0.

    V is linear below theta, so A V = mu k - r V(x) there and the rate is
    available in closed form.
    """
    _require_symmetric(s)
    sol = m.single
    x = np.asarray(x, dtype=float)
    below = x < sol.theta
    v = sol.k * (x - sol.theta) + sol.v_theta
    hjb = s.mu * sol.k - s.r * v + s.profit_of(0)(x)
    u = np.where(below, -hjb / (sol.k * (m.n_players - 1)), 0.0)
    return u[()]


def steady_state(m: SymmetricMpe, s: Scenario) -> float:
    """Rest point eta of the deterministic equilibrium flow: mu + N u(eta) = 0."""
    if s.sigma != 0.0:
        raise PreconditionError("steady state is defined for the deterministic limit (sigma = 0)")
    n = m.n_players
    f = lambda y: s.mu + n * float(regular_rate(m, s, y))
    lo, hi = m.theta - STEADY_BRACKET, m.theta
    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo > 0 > f_hi):
        raise BracketError(f"steady state not bracketed on ({lo:g}, {hi:g}): "
                           f"drift {f_lo:g} and {f_hi:g}")
    return brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


# --------------------------------------------------------------------------
# Asymmetric equilibrium


@dataclass(frozen=True)
class AsymmetricMpe:
    theta_prime: float
    theta_1: float
    b_coef: float
    u2_at_theta1: float
    single1: SingleSolution
    k1: float
    k2: float


def build_asymmetric(s: Scenario, theta_prime: float) -> AsymmetricMpe:
    """Player 1 controls singularly on [theta', theta_1]; both use rates below theta'."""
    if s.n_players != 2:
        raise PreconditionError("the asymmetric profile is a two-player construction")
    single1 = solve_single(s, 0)
    th1 = single1.theta
    if not theta_prime < th1:
        raise PreconditionError(f"theta' = {theta_prime:g} must lie below theta_1 = {th1:g}")
    cf = fundamental_solutions(s, 1)
    b = -float(resolvent(s, th1, 1, 1, cf)) / float(cf.phi(th1, 1))
    u2 = b * float(cf.phi(th1)) + float(resolvent(s, th1, 1, 0, cf))
    return AsymmetricMpe(float(theta_prime), th1, b, u2, single1, s.k(0), s.k(1))


def payoff_u1(m: AsymmetricMpe, s: Scenario, x, deriv=0):
    """Player 1's payoff, equal to its single-controller value."""
    return value_function(m.single1, s, x, deriv)


def payoff_u2(m: AsymmetricMpe, s: Scenario, x, deriv=0):
    """Player 2's payoff: free rides on [theta', theta_1], slope k2 below theta'."""
    cf = fundamental_solutions(s, 1)
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    up = x >= m.theta_1
    mid = (x > m.theta_prime) & ~up
    low = x <= m.theta_prime
    if up.any():
        out[up] = m.b_coef * cf.phi(x[up], deriv) + resolvent(s, x[up], 1, deriv, cf)
    if deriv == 0:
        out[mid] = m.u2_at_theta1
        out[low] = m.u2_at_theta1 + (x[low] - m.theta_prime) * m.k2
    else:
        out[mid] = 0.0
        out[low] = m.k2 if deriv == 1 else 0.0
    return out[()]


def _generator(s, f, x):
    return 0.5 * s.sigma**2 * f(x, 2) + s.mu * f(x, 1) - s.r * f(x, 0)


def asymmetric_rates(m: AsymmetricMpe, s: Scenario, x):
    """(u1, u2): each player's rate offsets the other's HJB residual below theta'."""
    x = np.asarray(x, dtype=float)
    below = x < m.theta_prime
    hjb2 = _generator(s, lambda y, d: payoff_u2(m, s, y, d), x) + s.profit_of(1)(x)
    hjb1 = _generator(s, lambda y, d: payoff_u1(m, s, y, d), x) + s.profit_of(0)(x)
    u1 = np.where(below, -hjb2 / m.k2, 0.0)
    u2 = np.where(below, -hjb1 / m.k1, 0.0)
    return u1[()], u2[()]


def asymmetric_grid(m: AsymmetricMpe, s: Scenario, step=0.01, below=20.0, above=30.0):
    """Uniform grid with the two kinks replaced by one-sided points at +-1e-6."""
    lo = m.theta_prime - below
    xc = s.profit_of(1).x_c
    if math.isfinite(xc):
        lo = min(lo, xc - 10.0)
    grid = np.arange(lo, m.theta_1 + above + step / 2, step)
    kinks = np.array([m.theta_prime, m.theta_1])
    keep = np.min(np.abs(grid[:, None] - kinks[None, :]), axis=1) > KINK_OFFSET
    extra = np.concatenate([kinks - KINK_OFFSET, kinks + KINK_OFFSET])
    return np.sort(np.concatenate([grid[keep], extra]))


def check_asymmetric_conditions(m: AsymmetricMpe, s: Scenario, grid=None,
                                tol=CONDITION_TOL) -> ConditionReport:
    """Grid check of U2' <= k2, A U2 + pi2 <= 0, nonnegative rates, linear growth."""
    grid = asymmetric_grid(m, s) if grid is None else np.asarray(grid, dtype=float)
    rep = ConditionReport()
    rep.add("U2prime", payoff_u2(m, s, grid, 1) - m.k2, grid, tol)
    hjb2 = _generator(s, lambda y, d: payoff_u2(m, s, y, d), grid) + s.profit_of(1)(grid)
    rep.add("AU2", hjb2, grid, tol)

    u1, u2 = asymmetric_rates(m, s, grid)
    rep.add("u1_nonnegative", -u1, grid, tol)
    rep.add("u2_nonnegative", -u2, grid, tol)
    # linear growth at grid resolution: log-log slope of |u| over the left tail
    umax = np.maximum(np.abs(u1), np.abs(u2))
    i_mid = max(1, int(0.125 * len(grid)))
    xa, xb = grid[0], grid[i_mid]
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = (math.log(umax[0] / umax[i_mid]) / math.log((1 + abs(xa)) / (1 + abs(xb)))
                if umax[0] > 0 and umax[i_mid] > 0 and abs(xa) > abs(xb) else 0.0)
    rep.add("u_linear_growth", expo - 1.0, xa, GROWTH_SLACK)
    rep.extras["delta_fit"] = float(np.max(umax / (1.0 + np.abs(grid))))
    return rep


def asymmetric_passes(s: Scenario, theta_prime, grid=None, tol=CONDITION_TOL):
    m = build_asymmetric(s, theta_prime)
    rep = check_asymmetric_conditions(m, s, grid, tol)
    return rep.passed, rep


def critical_k2(s: Scenario, theta_prime, lo, hi, tol=1e-3, record=None) -> float:
    """Smallest k2 for which the asymmetric profile is an equilibrium, by bisection.

    The predicate must fail at ``lo`` and pass at ``hi``.  ``record`` (a list)
    receives ``(k2, passed, report)`` for every evaluation.
    """
    def passes(k2):
        ok, rep = asymmetric_passes(s.with_k(1, k2), theta_prime)
        if record is not None:
            record.append((k2, ok, rep))
        return ok

    if not lo < hi:
        raise PreconditionError("need lo < hi")
    ok_lo, ok_hi = passes(lo), passes(hi)
    if ok_lo or not ok_hi:
        raise PreconditionError(
            f"bracket [{lo:g}, {hi:g}] must fail at lo and pass at hi "
            f"(got lo {'pass' if ok_lo else 'fail'}, hi {'pass' if ok_hi else 'fail'})")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
