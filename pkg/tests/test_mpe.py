import math

import numpy as np
import pytest

from commongood.errors import AsymmetryError, PreconditionError
from commongood.model import apply_generator
from commongood.mpe import (asymmetric_grid, asymmetric_passes, asymmetric_rates,
                            build_asymmetric, build_symmetric, check_asymmetric_conditions,
                            critical_k2, payoff_u1, payoff_u2, regular_rate, steady_state)
from commongood.single_control import solve_single, value_function

from conftest import make_scenario


def closed_rate(s, x):
    sol = solve_single(s)
    return -s.mu + s.r * sol.v_theta / sol.k + s.r * (x - sol.theta) - float(s.profit(x)) / sol.k


def test_rate_piecewise_reference(ex2):
    m = build_symmetric(ex2)
    assert float(regular_rate(m, ex2, -6.0)) == pytest.approx(0.7108203617519289, abs=1e-12)
    assert float(regular_rate(m, ex2, -6.0)) == pytest.approx(0.7109, abs=1e-3)
    for x in (-15.0, -10.0, -6.0, -4.5):
        assert float(regular_rate(m, ex2, x)) == pytest.approx(closed_rate(ex2, x), abs=1e-12)


def test_rate_vanishes_at_threshold(ex2):
    m = build_symmetric(ex2)
    assert 0.0 <= float(regular_rate(m, ex2, m.theta - 1e-8)) <= 1e-6
    above = regular_rate(m, ex2, np.linspace(m.theta, m.theta + 5, 20))
    assert np.all(above == 0.0)


def test_rate_offsets_hjb_residual(ex2):
    m = build_symmetric(ex2)
    sol = m.single
    xs = np.linspace(sol.theta - 12, sol.theta - 0.1, 40)
    av = apply_generator(lambda y: value_function(sol, ex2, y), ex2, xs)
    expected = -(av + ex2.profit(xs)) / sol.k
    assert np.allclose(regular_rate(m, ex2, xs), expected, atol=1e-6)


def test_rate_nonnegative_below_threshold(ex2):
    m = build_symmetric(ex2)
    xs = np.linspace(m.theta - 20, m.theta, 500)
    assert np.all(regular_rate(m, ex2, xs) >= 0)


def test_n_player_rate_is_split():
    s3 = make_scenario(rho=2.0, x_c=-10.0, ks=(1.0, 1.0, 1.0))
    m3 = build_symmetric(s3)
    assert m3.n_players == 3
    assert float(regular_rate(m3, s3, -6.0)) == pytest.approx(0.7108203617519289 / 2, abs=1e-12)


def test_steady_state(det):
    m = build_symmetric(det)
    eta = steady_state(m, det)
    assert eta == pytest.approx(-5.68646, abs=1e-3)
    assert eta == pytest.approx(-5.686463473101711, abs=1e-10)
    assert det.mu + 2 * float(regular_rate(m, det, eta)) == pytest.approx(0.0, abs=1e-12)
    assert eta < m.theta


def test_steady_state_needs_deterministic(ex1):
    with pytest.raises(PreconditionError):
        steady_state(build_symmetric(ex1), ex1)


def test_unequal_costs_refused(ex2):
    s = ex2.with_k(1, 0.8)
    with pytest.raises(AsymmetryError):
        build_symmetric(s)
    m = build_symmetric(ex2)
    with pytest.raises(AsymmetryError, match="asymmetry"):
        regular_rate(m, s, -6.0)


def test_single_player_is_not_a_game():
    s = make_scenario(ks=(1.0,))
    with pytest.raises(PreconditionError):
        build_symmetric(s)


def test_asymmetric_reference_passes(ex2):
    m = build_asymmetric(ex2, -6.0)
    assert m.b_coef == pytest.approx(0.0892375872907212, rel=1e-10)
    assert m.u2_at_theta1 == pytest.approx(-7 / 3, abs=1e-12)
    rep = check_asymmetric_conditions(m, ex2)
    assert rep.passed, rep.violated
    assert rep["U2prime"].max_violation <= 1e-8
    assert rep["AU2"].max_violation <= 1e-8


def test_asymmetric_coefficient_without_cut(ex1):
    # with a pure exponential profit the coefficient carries the cut term c1
    m = build_asymmetric(ex1, -6.0)
    assert m.b_coef == pytest.approx(0.09509122, abs=1e-7)


def test_payoff_continuity(ex2):
    m = build_asymmetric(ex2, -6.0)
    for x in (m.theta_prime, m.theta_1):
        lo, hi = (float(payoff_u2(m, ex2, x + d)) for d in (-1e-9, 1e-9))
        assert lo == pytest.approx(hi, abs=1e-8)


def test_free_rider_earns_more_in_lift_band(ex2):
    m = build_asymmetric(ex2, -6.0)
    xs = np.linspace(m.theta_prime + 1e-6, m.theta_1 - 1e-6, 200)
    assert np.all(payoff_u2(m, ex2, xs) >= payoff_u1(m, ex2, xs))


def test_leader_payoff_is_single_controller_value(ex2):
    m = build_asymmetric(ex2, -50.0)
    xs = np.linspace(m.theta_1, m.theta_1 + 10, 50)
    sol = solve_single(ex2)
    assert np.array_equal(payoff_u1(m, ex2, xs), value_function(sol, ex2, xs))


def test_asymmetric_rates_nonnegative(ex2):
    m = build_asymmetric(ex2, -6.0)
    u1, u2 = asymmetric_rates(m, ex2, np.linspace(-20, -6.0 - 1e-6, 100))
    assert np.all(u1 >= 0) and np.all(u2 >= 0)
    z1, z2 = asymmetric_rates(m, ex2, np.array([-5.0, -4.0]))
    assert np.all(z1 == 0) and np.all(z2 == 0)


def test_grid_avoids_kinks(ex2):
    m = build_asymmetric(ex2, -6.0)
    g = asymmetric_grid(m, ex2)
    for kink in (m.theta_prime, m.theta_1):
        assert np.min(np.abs(g - kink)) == pytest.approx(1e-6, rel=1e-3)


def test_cheap_follower_violates_slope(ex2):
    ok, rep = asymmetric_passes(ex2.with_k(1, 0.4), -6.0)
    assert not ok
    assert "U2prime" in rep.violated


def test_theta_prime_must_be_below_leader_threshold(ex2):
    with pytest.raises(PreconditionError):
        build_asymmetric(ex2, -4.0)


def test_critical_k2(ex2):
    record = []
    k2 = critical_k2(ex2, -6.0, 0.3, 1.0, 1e-3, record)
    assert k2 == pytest.approx(0.5383, abs=5e-3)
    # max of U2' above theta_1 with k2 at its critical value
    m = build_asymmetric(ex2, -6.0)
    xs = np.linspace(m.theta_1, m.theta_1 + 10, 20001)
    exact = float(np.max(payoff_u2(m, ex2, xs, 1)))
    assert abs(k2 - exact) <= 1e-3
    assert len(record) >= 2
    assert critical_k2(ex2, -8.0, 0.3, 1.0, 1e-3) == pytest.approx(k2, abs=1e-3)


def test_critical_k2_needs_a_bracket(ex2):
    with pytest.raises(PreconditionError):
        critical_k2(ex2, -6.0, 0.6, 1.0)
    with pytest.raises(PreconditionError):
        critical_k2(ex2, -6.0, 0.3, 0.4)
