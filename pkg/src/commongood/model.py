"""Problem instances: diffusion, profit flow, fundamental solutions, resolvent.

The state Z is a constant-coefficient diffusion with drift ``mu < 0`` pushed up
by the players' contributions.  Profit is ``1 - exp(nu x)``, optionally
continued linearly with slope ``rho`` below a cutoff ``x_c`` so that it grows
at most linearly for very low states.

All evaluation functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import AssumptionError, ScenarioError

_FD_REL_STEP = 1e-4


def _finite(name, value, allow_neg_inf=False):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"field '{name}' must be a number, got {value!r}") from None
    if math.isnan(value) or (math.isinf(value) and not (allow_neg_inf and value < 0)):
        raise ScenarioError(f"field '{name}' must be finite, got {value!r}")
    return value


def _piecewise(x, cut, upper, lower):
    """Evaluate ``upper`` on x >= cut and ``lower`` below, without touching the unused branch."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    hi = x >= cut
    if hi.any():
        out[hi] = upper(x[hi])
    if (~hi).any():
        out[~hi] = lower(x[~hi])
    return out[()]


@dataclass(frozen=True)
class Diffusion:
    mu: float
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "mu", _finite("mu", self.mu))
        object.__setattr__(self, "sigma", _finite("sigma", self.sigma))
        if self.sigma < 0:
            raise ScenarioError(f"field 'sigma' must be >= 0, got {self.sigma}")

    @property
    def deterministic(self) -> bool:
        return self.sigma == 0.0


@dataclass(frozen=True)
class ProfitSpec:
    """Flow profit ``1 - exp(nu x)`` for x >= x_c, linear with slope rho below.

    ``x_c = -inf`` (the default) disables the linear branch.
    """

    nu: float
    rho: float | None = None
    x_c: float = -math.inf

    def __post_init__(self):
        object.__setattr__(self, "nu", _finite("nu", self.nu))
        object.__setattr__(self, "x_c", _finite("x_c", self.x_c, allow_neg_inf=True))
        if self.rho is not None:
            object.__setattr__(self, "rho", _finite("rho", self.rho))
        elif math.isfinite(self.x_c):
            raise ScenarioError("field 'rho' is required when 'x_c' is given")

    @property
    def piecewise(self) -> bool:
        return math.isfinite(self.x_c)

    @property
    def pi_max(self) -> float:
        """Upper bound of the profit flow."""
        return 1.0

    def __call__(self, x, deriv=0):
        nu = self.nu
        if deriv == 0:
            upper = lambda y: 1.0 - np.exp(nu * y)
        else:
            upper = lambda y: -(nu**deriv) * np.exp(nu * y)
        if not self.piecewise:
            return upper(np.asarray(x, dtype=float))[()]
        at_cut = 1.0 - math.exp(nu * self.x_c)
        if deriv == 0:
            lower = lambda y: at_cut + (y - self.x_c) * self.rho
        elif deriv == 1:
            lower = lambda y: np.full_like(y, self.rho)
        else:
            lower = np.zeros_like
        return _piecewise(x, self.x_c, upper, lower)


@dataclass(frozen=True)
class PlayerParams:
    k: float
    profit: ProfitSpec | None = None  # None: use the scenario's shared profit

    def __post_init__(self):
        object.__setattr__(self, "k", _finite("k", self.k))
        if self.k <= 0:
            raise ScenarioError(f"field 'k' must be > 0, got {self.k}")


@dataclass(frozen=True)
class Scenario:
    diffusion: Diffusion
    r: float
    profit: ProfitSpec
    players: tuple[PlayerParams, ...] = field(default_factory=lambda: (PlayerParams(1.0),))

    def __post_init__(self):
        object.__setattr__(self, "r", _finite("r", self.r))
        if self.r <= 0:
            raise ScenarioError(f"field 'r' must be > 0, got {self.r}")
        players = tuple(self.players)
        if not players:
            raise ScenarioError("field 'players' must list at least one player")
        object.__setattr__(self, "players", players)

    @property
    def mu(self) -> float:
        return self.diffusion.mu

    @property
    def sigma(self) -> float:
        return self.diffusion.sigma

    @property
    def n_players(self) -> int:
        return len(self.players)

    def k(self, player=0) -> float:
        return self.players[player].k

    def profit_of(self, player=0) -> ProfitSpec:
        return self.players[player].profit or self.profit

    def with_k(self, player, k) -> "Scenario":
        players = list(self.players)
        players[player] = replace(players[player], k=k)
        return replace(self, players=tuple(players))

    def with_sigma(self, sigma) -> "Scenario":
        return replace(self, diffusion=Diffusion(self.mu, sigma))

    def with_players(self, ks: Sequence[float]) -> "Scenario":
        return replace(self, players=tuple(PlayerParams(k) for k in ks))

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ScenarioError("scenario must be a JSON object")
        for name in ("r", "mu", "sigma", "nu", "players"):
            if name not in data:
                raise ScenarioError(f"missing field '{name}'")
        unknown = set(data) - {"r", "mu", "sigma", "nu", "rho", "x_c", "players"}
        if unknown:
            raise ScenarioError(f"unknown field '{sorted(unknown)[0]}'")
        x_c = data.get("x_c")
        profit = ProfitSpec(nu=data["nu"], rho=data.get("rho"),
                            x_c=-math.inf if x_c is None else x_c)
        if not isinstance(data["players"], list):
            raise ScenarioError("field 'players' must be a list")
        players = []
        for i, p in enumerate(data["players"]):
            if not isinstance(p, dict) or "k" not in p:
                raise ScenarioError(f"missing field 'players[{i}].k'")
            own = p.get("profit")
            if own is not None:
                own = ProfitSpec(nu=own["nu"], rho=own.get("rho"),
                                 x_c=own.get("x_c", -math.inf))
            players.append(PlayerParams(k=p["k"], profit=own))
        return cls(Diffusion(data["mu"], data["sigma"]), data["r"], profit, tuple(players))

    def to_dict(self) -> dict:
        out = {"r": self.r, "mu": self.mu, "sigma": self.sigma, "nu": self.profit.nu}
        if self.profit.piecewise:
            out["rho"] = self.profit.rho
            out["x_c"] = self.profit.x_c
        out["players"] = []
        for p in self.players:
            entry = {"k": p.k}
            if p.profit is not None:
                entry["profit"] = {"nu": p.profit.nu}
                if p.profit.piecewise:
                    entry["profit"].update(rho=p.profit.rho, x_c=p.profit.x_c)
            out["players"].append(entry)
        return out


def load_scenario(path) -> Scenario:
    """Read a scenario JSON file.  Raises FileNotFoundError or ScenarioError."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON in {path}: {exc}") from None
    return Scenario.from_dict(data)


# --------------------------------------------------------------------------
# Closed forms


@dataclass(frozen=True)
class ClosedForms:
    """Exponents of the fundamental solutions and the resolvent coefficients.

    ``gamma_plus`` is None in the deterministic limit, where only the
    decreasing solution exists.  ``c1``/``c2`` multiply phi and psi in the
    piecewise resolvent; ``c1_at_cut``/``c2_at_cut`` are the same terms
    evaluated at ``x_c`` and are what evaluation uses (``c2`` alone
    overflows for very low cutoffs).
    """

    gamma_plus: float | None
    gamma_minus: float
    beta: float
    c1: float = 0.0
    c2: float = 0.0
    x_c: float = -math.inf
    c1_at_cut: float = 0.0
    c2_at_cut: float = 0.0

    def phi(self, x, deriv=0):
        g = self.gamma_minus
        return (g**deriv) * np.exp(g * np.asarray(x, dtype=float))

    def psi(self, x, deriv=0):
        if self.gamma_plus is None:
            raise ValueError("deterministic limit has no increasing fundamental solution")
        g = self.gamma_plus
        return (g**deriv) * np.exp(g * np.asarray(x, dtype=float))


def _gammas(mu, sigma, r):
    if sigma == 0.0:
        return None, r / mu
    disc = math.sqrt(mu * mu + 2.0 * r * sigma * sigma)
    s2 = sigma * sigma
    gp = (-mu + disc) / s2
    # product of roots is -2r/sigma^2; avoids cancellation when mu < 0
    gm = -2.0 * r / (s2 * gp)
    return gp, gm


def fundamental_solutions(s: Scenario, player=0) -> ClosedForms:
    mu, sigma, r = s.mu, s.sigma, s.r
    prof = s.profit_of(player)
    gp, gm = _gammas(mu, sigma, r)
    beta = r - mu * prof.nu - 0.5 * sigma * sigma * prof.nu**2
    if not prof.piecewise:
        return ClosedForms(gp, gm, beta)

    xc = prof.x_c
    f1, f2 = _f1(s, prof, beta), _f2(s, prof)
    d0 = f2(xc, 0) - f1(xc, 0)
    d1 = f2(xc, 1) - f1(xc, 1)
    if gp is None:
        # first-order ODE: only continuity can be imposed; below x_c the flow never returns
        a, b = d0, 0.0
    else:
        a = (d1 - gp * d0) / (gm - gp)
        b = a - d0
    with np.errstate(over="ignore"):
        c1 = a * math.exp(-gm * xc)
        c2 = 0.0 if gp is None else b * float(np.exp(-gp * xc))
    return ClosedForms(gp, gm, beta, float(c1), float(c2), xc, float(a), float(b))


def _f1(s, prof, beta):
    """Particular solution on the exponential branch."""
    nu, r = prof.nu, s.r

    def f(x, deriv=0):
        e = np.exp(nu * np.asarray(x, dtype=float))
        if deriv == 0:
            return 1.0 / r - e / beta
        return -(nu**deriv) * e / beta

    return f


def _f2(s, prof):
    """Particular solution on the linear branch."""
    r, rho, xc = s.r, prof.rho, prof.x_c
    at_cut = 1.0 - math.exp(prof.nu * xc)

    def f(x, deriv=0):
        x = np.asarray(x, dtype=float)
        if deriv == 0:
            return rho * s.mu / r**2 + at_cut / r + rho / r * (x - xc)
        if deriv == 1:
            return np.full_like(x, rho / r)[()]
        return np.zeros_like(x)[()]

    return f


def resolvent(s: Scenario, x, player=0, deriv=0, forms: ClosedForms | None = None):
    """Expected discounted profit of the uncontrolled state started at x.

    ``deriv`` selects the 0th, 1st or 2nd derivative in x.
    """
    prof = s.profit_of(player)
    cf = forms or fundamental_solutions(s, player)
    f1 = _f1(s, prof, cf.beta)
    if not prof.piecewise:
        return np.asarray(f1(x, deriv), dtype=float)[()]
    xc, gm, gp = prof.x_c, cf.gamma_minus, cf.gamma_plus
    f2 = _f2(s, prof)

    def upper(y):
        return f1(y, deriv) + cf.c1_at_cut * gm**deriv * np.exp(gm * (y - xc))

    def lower(y):
        out = f2(y, deriv)
        if gp is not None:
            out = out + cf.c2_at_cut * gp**deriv * np.exp(gp * (y - xc))
        return out

    return _piecewise(x, xc, upper, lower)


def q_function(s: Scenario, x, player=0):
    """Profit plus the generator applied to the linear cost: pi(x) + (mu - r x) k."""
    k = s.k(player)
    x = np.asarray(x, dtype=float)
    return (s.profit_of(player)(x) + (s.mu - s.r * x) * k)[()]


def argmax_q(s: Scenario, player=0, grid=None) -> float:
    """Locate x* = argmax q by a grid scan followed by bounded refinement."""
    if grid is None:
        grid = default_scan_grid(s, player)
    grid = np.asarray(grid, dtype=float)
    with np.errstate(over="ignore"):
        qv = q_function(s, grid, player)
    i = int(np.nanargmax(qv))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if hi <= lo:
        return float(grid[i])
    res = minimize_scalar(lambda y: -float(q_function(s, y, player)), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12})
    return float(res.x)


def default_scan_grid(s: Scenario, player=0, step=0.01):
    lo = -40.0
    xc = s.profit_of(player).x_c
    if math.isfinite(xc):
        lo = min(lo, xc - 10.0)
    return np.arange(lo, 20.0 + step / 2, step)


def apply_generator(f: Callable, s: Scenario, x, df: Callable | None = None,
                    d2f: Callable | None = None):
    """Apply ``1/2 sigma^2 f'' + mu f' - r f`` at x.

    Derivatives not supplied are taken by central differences with step
    ``1e-4 * max(1, |x|)``.
    """
    x = np.asarray(x, dtype=float)
    fx = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(fx)):
        raise ValueError("f is not finite at the evaluation point")
    h = _FD_REL_STEP * np.maximum(1.0, np.abs(x))
    if df is None or d2f is None:
        fp, fm = np.asarray(f(x + h), dtype=float), np.asarray(f(x - h), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise ValueError("f is not finite near the evaluation point")
    d1 = np.asarray(df(x), dtype=float) if df is not None else (fp - fm) / (2.0 * h)
    d2 = np.asarray(d2f(x), dtype=float) if d2f is not None else (fp - 2.0 * fx + fm) / h**2
    return (0.5 * s.sigma**2 * d2 + s.mu * d1 - s.r * fx)[()]


# --------------------------------------------------------------------------
# Validation


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[Check]
    x_star: dict[int, float] = field(default_factory=dict)
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> Check | None:
        return next((c for c in self.checks if not c.passed), None)

    def raise_for_failure(self):
        bad = self.failed
        if bad is not None:
            raise AssumptionError(bad.name, bad.detail or f"value {bad.value!r}")

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [vars(c) for c in self.checks],
            "x_star": {str(i + 1): v for i, v in self.x_star.items()},
            "diagnostics": self.diagnostics,
        }


def _single_peak(values) -> bool:
    slope = np.sign(np.diff(values))
    slope = slope[slope != 0]
    if slope.size == 0:
        return False
    changes = np.count_nonzero(np.diff(slope))
    return changes == 1 and slope[0] > 0 and slope[-1] < 0


def validate_scenario(s: Scenario, grid=None) -> ValidationReport:
    """Check the standing assumptions, stopping at the first violation."""
    report = ValidationReport(checks=[])

    def add(name, passed, value, detail=""):
        report.checks.append(Check(name, bool(passed), float(value), detail))
        return passed

    if not add("mu_negative", s.mu < 0, s.mu, "drift must be negative"):
        return report
    if not add("sigma_nonnegative", s.sigma >= 0, s.sigma):
        return report
    for i in range(s.n_players):
        prof, k = s.profit_of(i), s.k(i)
        tag = f"[player {i + 1}]" if s.n_players > 1 else ""
        if not add("nu_negative" + tag, prof.nu < 0, prof.nu,
                   "profit 1-exp(nu x) is increasing only for nu < 0"):
            return report
        beta = s.r - s.mu * prof.nu - 0.5 * s.sigma**2 * prof.nu**2
        if not add("beta_positive" + tag, beta > 0, beta,
                   f"1/2 sigma^2 nu^2 + mu nu - r = {-beta:g} must be < 0"):
            return report
        if prof.piecewise:
            if not add("rho_exceeds_rk" + tag, prof.rho > s.r * k, prof.rho - s.r * k,
                       f"rho={prof.rho:g} must exceed r*k={s.r * k:g}"):
                return report
        scan = default_scan_grid(s, i) if grid is None else np.asarray(grid, dtype=float)
        with np.errstate(over="ignore"):
            qv = q_function(s, scan, i)
        peaked = np.all(np.isfinite(qv)) and _single_peak(qv)
        x_star = argmax_q(s, i, scan) if peaked else float("nan")
        if not add("q_single_peak" + tag, peaked, x_star,
                   "q must increase then decrease on the scan grid"):
            return report
        report.x_star[i] = x_star
        # a.e. nonvanishing of pi' - r k; flags grid fraction where it is numerically zero
        gap = np.abs(prof(scan, deriv=1) - s.r * k)
        report.diagnostics["flat_fraction" + tag] = float(np.mean(gap < 1e-12))
    return report


def require_valid(s: Scenario) -> Scenario:
    validate_scenario(s).raise_for_failure()
    return s
