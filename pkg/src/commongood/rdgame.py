"""Lump-sum R&D race with full spillover.

Each firm chooses a discovery intensity lambda at time zero (it can only be
raised, at cost k per unit) and pays a flow cost c lambda^2 / 2 until the
first discovery, which is worth R to both firms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import PreconditionError


@dataclass(frozen=True)
class RdParams:
    reward: float
    r: float
    k: float
    c: float
    lambda0: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        for name in ("reward", "r", "k", "c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise PreconditionError(f"{name} must be positive and finite, got {v}")
        if len(self.lambda0) != 2 or min(self.lambda0) < 0:
            raise PreconditionError("lambda0 must be two nonnegative rates")
        if self.discriminant() <= 0:
            raise PreconditionError("reward too small: symmetric first-order condition has no real root")

    def discriminant(self) -> float:
        k, c = self.k, self.c
        return (4 * k + c) ** 2 + 2 * (self.reward / self.r - k) * (8 * k + 3 * c)


@dataclass(frozen=True)
class RdSolution:
    lambda_star: float
    positive_effort: bool = True
    notes: list = field(default_factory=list, compare=False)


def symmetric_effort(p: RdParams) -> RdSolution:
    """Positive root of (8k+3c) l^2 + 2(c+4k) r l - 2(R - kr) r = 0."""
    k, c, r = p.k, p.c, p.r
    if p.reward <= k * r:
        return RdSolution(0.0, False, ["no positive effort: R <= k r"])
    lam = r * (-(4 * k + c) + math.sqrt(p.discriminant())) / (8 * k + 3 * c)
    return RdSolution(lam)


def payoff_rd(p: RdParams, lam, lam_opp, lam_init=0.0) -> float:
    """Time-zero payoff of a firm at intensity ``lam`` against ``lam_opp``."""
    if lam < lam_init:
        raise PreconditionError(f"effort cannot fall below its initial level ({lam} < {lam_init})")
    h = p.c / (2 * p.r)
    tot = lam + lam_opp
    return -h * lam**2 + (p.reward + h * lam**2) * tot / (p.r + tot) - p.k * (lam - lam_init)


def _foc_coeffs(p: RdParams, lam_opp):
    # numerator of dV/dlambda times (r + lambda + lambda_opp)^2, quadratic in lambda
    k, c, r, R = p.k, p.c, p.r, p.reward
    a = -(c / 2 + k)
    b = -(c * r + c * lam_opp + 2 * k * (r + lam_opp))
    c0 = R * r - k * (r + lam_opp) ** 2
    return a, b, c0


def best_response_rd(p: RdParams, lam_opp, lam_init=0.0) -> float:
    """Payoff-maximizing intensity against ``lam_opp``, never below ``lam_init``.

    The first-order numerator is a concave quadratic; its larger root is the
    unique interior critical point when the constant term is positive.
    """
    a, b, c0 = _foc_coeffs(p, lam_opp)
    disc = b * b - 4 * a * c0
    if disc < 0:
        return float(lam_init)
    sq = math.sqrt(disc)
    # larger root of a l^2 + b l + c0 with a < 0, in a cancellation-free form
    q = -0.5 * (b - sq)
    roots = [q / a, c0 / q] if q != 0 else [-b / (2 * a)]
    lam = max(roots)
    return float(max(lam_init, lam))


def foc_slope(p: RdParams, lam, lam_opp) -> float:
    """Sign-carrying numerator of the first-order condition at ``lam``."""
    a, b, c0 = _foc_coeffs(p, lam_opp)
    return a * lam * lam + b * lam + c0
