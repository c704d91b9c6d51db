"""Single decision maker: reflecting threshold, value function, optimality check.

Below the threshold theta the controller pushes the state straight up to
theta, so the value is linear with slope k there.  Above theta nobody acts and
the value is the resolvent plus a multiple A of the decreasing fundamental
solution.  theta and A are fixed by requiring V' = k and V'' = 0 at theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError, PreconditionError
from .model import (ClosedForms, Scenario, apply_generator, argmax_q,
                    fundamental_solutions, resolvent)
from .report import ConditionReport

ROOT_XTOL = 1e-12
MAX_EXPANSIONS = 60
OPTIMALITY_TOL = 1e-6


@dataclass(frozen=True)
class SingleSolution:
    theta: float
    a_coef: float
    v_theta: float
    k: float
    player: int = 0


OptimalityReport = ConditionReport


def closed_form_threshold(s: Scenario, player=0) -> float:
    """theta = ln(k beta g / (nu (nu - g))) / nu with g the decreasing exponent.

    Valid for the exponential profit; a linear continuation below x_c leaves
    it unchanged as long as theta >= x_c.
    """
    cf = fundamental_solutions(s, player)
    nu, k, g = s.profit_of(player).nu, s.k(player), cf.gamma_minus
    arg = k * cf.beta * g / (nu * (nu - g))
    if not arg > 0:
        raise BracketError(f"closed-form threshold undefined (log argument {arg:g})")
    return math.log(arg) / nu


def pasting_residual(s: Scenario, x, player=0, forms: ClosedForms | None = None):
    """(k - R'(x)) phi''(x) + R''(x) phi'(x); vanishes at the threshold."""
    cf = forms or fundamental_solutions(s, player)
    k = s.k(player)
    r1 = resolvent(s, x, player, 1, cf)
    r2 = resolvent(s, x, player, 2, cf)
    return (k - r1) * cf.phi(x, 2) + r2 * cf.phi(x, 1)


def generic_threshold(s: Scenario, player=0) -> float:
    """Root of the cross-multiplied smooth-pasting condition left of argmax q."""
    cf = fundamental_solutions(s, player)
    # in the deterministic limit theta coincides with x*, so step just past it
    x_star = argmax_q(s, player)
    hi = x_star + 1e-6 * max(1.0, abs(x_star))
    n_hi = float(pasting_residual(s, hi, player, cf))
    width = 1.0
    for _ in range(MAX_EXPANSIONS):
        lo = hi - width
        with np.errstate(over="ignore", invalid="ignore"):
            n_lo = float(pasting_residual(s, lo, player, cf))
        if not math.isfinite(n_lo):
            break
        if n_lo == 0.0:
            return lo
        if np.sign(n_lo) != np.sign(n_hi):
            return brentq(lambda y: float(pasting_residual(s, y, player, cf)), lo, hi,
                          xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)
        width *= 2.0
    else:
        lo = hi - width / 2
    raise BracketError(
        f"threshold not bracketed on ({lo:g}, {hi:g}): "
        f"N(lo)={n_lo:g}, N(hi)={n_hi:g}")


def solve_threshold(s: Scenario, player=0, method="auto") -> float:
    """Reflecting threshold for ``player`` acting alone.

    ``method`` is ``"closed"``, ``"generic"`` or ``"auto"`` (closed form when it
    applies, generic root otherwise).
    """
    if method == "generic":
        return generic_threshold(s, player)
    if method == "closed":
        return closed_form_threshold(s, player)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    try:
        theta = closed_form_threshold(s, player)
    except BracketError:
        return generic_threshold(s, player)
    if theta < s.profit_of(player).x_c:
        return generic_threshold(s, player)
    return theta


def coefficient_A(s: Scenario, theta, player=0) -> float:
    cf = fundamental_solutions(s, player)
    dphi = float(cf.phi(theta, 1))
    if dphi == 0.0:
        raise PreconditionError("phi'(theta) vanishes; coefficient undefined")
    return (s.k(player) - float(resolvent(s, theta, player, 1, cf))) / dphi


def make_solution(s: Scenario, theta, a_coef=None, player=0) -> SingleSolution:
    """Assemble a solution; A is fitted from V'(theta) = k unless given.

    V(theta) is always set from the upper branch so V is continuous.
    """
    if a_coef is None:
        a_coef = coefficient_A(s, theta, player)
    cf = fundamental_solutions(s, player)
    v_theta = float(resolvent(s, theta, player, 0, cf) + a_coef * cf.phi(theta))
    return SingleSolution(float(theta), float(a_coef), v_theta, s.k(player), player)


def solve_single(s: Scenario, player=0, method="auto") -> SingleSolution:
    return make_solution(s, solve_threshold(s, player, method), player=player)


def value_function(sol: SingleSolution, s: Scenario, x, deriv=0):
    """Piecewise value: linear slope k below theta, R pi + A phi above."""
    cf = fundamental_solutions(s, sol.player)
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    up = x >= sol.theta
    if up.any():
        xu = x[up]
        out[up] = resolvent(s, xu, sol.player, deriv, cf) + sol.a_coef * cf.phi(xu, deriv)
    lo = ~up
    if lo.any():
        if deriv == 0:
            out[lo] = sol.k * (x[lo] - sol.theta) + sol.v_theta
        elif deriv == 1:
            out[lo] = sol.k
        else:
            out[lo] = 0.0
    return out[()]


def default_grid(theta, half_width=15.0, step=0.01):
    n = int(round(2 * half_width / step)) + 1
    return np.linspace(theta - half_width, theta + half_width, n)


def hjb_residual(sol: SingleSolution, s: Scenario, x):
    """A V + pi evaluated with analytic derivatives."""
    return apply_generator(lambda y: value_function(sol, s, y), s, x,
                           lambda y: value_function(sol, s, y, 1),
                           lambda y: value_function(sol, s, y, 2)) + s.profit_of(sol.player)(x)


def verify_optimality(sol: SingleSolution, s: Scenario, grid=None,
                      tol=OPTIMALITY_TOL) -> ConditionReport:
    """Grid check of A V + pi <= 0, V' <= k and their complementarity.

    Smooth-pasting residuals at theta are reported alongside, both with
    analytic derivatives and with central differences.
    """
    grid = default_grid(sol.theta) if grid is None else np.asarray(grid, dtype=float)
    hjb = hjb_residual(sol, s, grid)
    slope = value_function(sol, s, grid, 1) - sol.k
    rep = ConditionReport()
    rep.add("AV_plus_pi", hjb, grid, tol)
    rep.add("V_prime_minus_k", slope, grid, tol)
    rep.add("complementarity", np.abs(hjb * slope), grid, tol)

    th = sol.theta
    rep.add("smooth_pasting_first", abs(value_function(sol, s, th, 1) - sol.k), th, 1e-10)
    rep.add("smooth_pasting_second", abs(value_function(sol, s, th, 2)), th, 1e-8)
    h = 1e-5 * max(1.0, abs(th))  # balances truncation against cancellation in V"
    vp, v0, vm = (float(value_function(sol, s, th + d)) for d in (h, 0.0, -h))
    rep.add("smooth_pasting_first_fd", abs((vp - vm) / (2 * h) - sol.k), th, 1e-4)
    rep.add("smooth_pasting_second_fd", abs((vp - 2 * v0 + vm) / h**2), th, 1e-4)
    return rep
