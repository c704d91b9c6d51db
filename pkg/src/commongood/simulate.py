"""Monte Carlo simulation of the controlled state and discounted payoffs.

Each path draws its Gaussian increments from its own stream, derived from
``(seed, path_index)`` with numpy's SeedSequence spawn keys, so results do not
depend on how paths are split across workers.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _kernel as K
from .errors import PreconditionError, SimulationError
from .model import Scenario
from .mpe import AsymmetricMpe, SymmetricMpe

CHUNK = 512


@dataclass(frozen=True)
class NoControl:
    """Nobody contributes: the uncontrolled diffusion."""


@dataclass(frozen=True)
class Singular:
    """Reflect at ``theta``.  ``controller`` pays; None splits pushes 50/50."""

    theta: float
    controller: int | None = 0


@dataclass(frozen=True)
class SymmetricRegular:
    mpe: SymmetricMpe


@dataclass(frozen=True)
class Asymmetric:
    mpe: AsymmetricMpe


ControlPolicy = Union[NoControl, Singular, SymmetricRegular, Asymmetric]


@dataclass(frozen=True)
class SimConfig:
    z0: float
    dt: float = 1e-3
    horizon: float = 25.0
    n_paths: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise PreconditionError(f"dt must be positive, got {self.dt}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise PreconditionError(f"horizon must be positive, got {self.horizon}")
        if self.dt > self.horizon:
            raise PreconditionError("dt must not exceed the horizon")
        if self.n_paths < 1:
            raise PreconditionError("n_paths must be >= 1")
        if not math.isfinite(self.z0):
            raise PreconditionError("z0 must be finite")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))


@dataclass
class PathRecord:
    times: np.ndarray
    z: np.ndarray
    xi1: np.ndarray
    xi2: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    # (time, player index, size); player is 0 or 1
    jumps: list[tuple[float, int, float]] = field(default_factory=list)
    # state just before each jump, aligned with ``jumps``
    jump_from: list[float] = field(default_factory=list)

    def to_csv(self) -> str:
        """CSV with columns t,z,xi1,xi2,u1,u2,jump_player.

        A jump at time t appears as an extra row holding the pre-jump state,
        flagged with the 1-based player number, just before the regular row
        for t.
        """
        buf = io.StringIO()
        buf.write("t,z,xi1,xi2,u1,u2,jump_player\n")
        fmt = lambda v: format(float(v), ".17g")
        pending = sorted(zip(self.jumps, self.jump_from), key=lambda j: j[0][0])
        ji = 0
        for i, t in enumerate(self.times):
            row_xi = [self.xi1[i], self.xi2[i]]
            at_t = []
            while ji < len(pending) and pending[ji][0][0] <= t + 1e-12:
                at_t.append(pending[ji])
                ji += 1
            # pre-jump xi subtracts everything credited at this instant
            before = list(row_xi)
            for (_, player, size), _ in at_t:
                before[player] -= size
            for (_, player, size), z_pre in at_t:
                buf.write(",".join([fmt(t), fmt(z_pre), fmt(before[0]), fmt(before[1]),
                                    fmt(self.u1[i]), fmt(self.u2[i]), str(player + 1)]) + "\n")
                before[player] += size
            buf.write(",".join([fmt(t), fmt(self.z[i]), fmt(row_xi[0]), fmt(row_xi[1]),
                                fmt(self.u1[i]), fmt(self.u2[i]), "0"]) + "\n")
        return buf.getvalue()


@dataclass
class PayoffEstimate:
    mean: float
    std_error: float
    n_paths: int
    dt: float
    horizon: float
    truncation_bound: float

    def to_dict(self) -> dict:
        return dict(vars(self))


def _profit_slots(s: Scenario):
    p1 = s.profit_of(0)
    p2 = s.profit_of(1) if s.n_players > 1 else p1
    return p1, p2


def encode_policy(s: Scenario, p: ControlPolicy) -> np.ndarray:
    par = K.empty_params()
    par[K.MU], par[K.SIGMA], par[K.R] = s.mu, s.sigma, s.r
    par[K.K1] = s.k(0)
    par[K.K2] = s.k(1) if s.n_players > 1 else 0.0
    for (nu_i, rho_i, xc_i), prof in zip(((K.NU1, K.RHO1, K.XC1), (K.NU2, K.RHO2, K.XC2)),
                                         _profit_slots(s)):
        par[nu_i] = prof.nu
        par[rho_i] = prof.rho if prof.rho is not None else 0.0
        par[xc_i] = prof.x_c

    if isinstance(p, NoControl):
        pass
    elif isinstance(p, Singular):
        par[K.HAS_LIFT] = 1.0
        par[K.LIFT_TO] = p.theta
        if p.controller is None:
            if s.n_players < 2:
                raise PreconditionError("split attribution needs two players")
            par[K.SHARE1] = 0.5
        elif p.controller in (0, 1):
            par[K.SHARE1] = 1.0 if p.controller == 0 else 0.0
        else:
            raise PreconditionError("controller must be 0, 1 or None")
    elif isinstance(p, SymmetricRegular):
        m = p.mpe
        if m.n_players != 2 or s.n_players != 2:
            raise PreconditionError("simulation supports two-player games only")
        sol = m.single
        k, th = sol.k, sol.theta
        par[K.CAP] = th
        for a, b, d, src, who in ((K.A1, K.B1, K.D1, K.SRC1, 0), (K.A2, K.B2, K.D2, K.SRC2, 1)):
            # u = (-mu k + r V(theta) - r k theta + r k x - pi(x)) / k
            par[a] = -s.mu * k + s.r * sol.v_theta - s.r * k * th
            par[b] = s.r * k
            par[d] = k
            par[src] = who
    elif isinstance(p, Asymmetric):
        m = p.mpe
        par[K.HAS_LIFT] = 1.0
        par[K.LIFT_LO] = m.theta_prime
        par[K.LIFT_TO] = m.theta_1
        par[K.SHARE1] = 1.0
        par[K.CAP] = m.theta_prime
        # u1 offsets player 2's residual: U2 = U2(theta1) + (x - theta') k2 below theta'
        par[K.A1] = -s.mu * m.k2 + s.r * m.u2_at_theta1 - s.r * m.theta_prime * m.k2
        par[K.B1] = s.r * m.k2
        par[K.D1] = m.k2
        par[K.SRC1] = 1
        # u2 offsets player 1's residual: V1 = V1(theta1) + (x - theta1) k1 below theta1
        v1 = m.single1
        par[K.A2] = -s.mu * m.k1 + s.r * v1.v_theta - s.r * v1.theta * m.k1
        par[K.B2] = s.r * m.k1
        par[K.D2] = m.k1
        par[K.SRC2] = 0
    else:
        raise TypeError(f"unknown policy {p!r}")
    return par


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(path_index),))
    return np.random.Generator(np.random.PCG64(ss))


def _controller_of_jumps(p: ControlPolicy):
    if isinstance(p, Singular):
        return p.controller
    return 0


def simulate_path(s: Scenario, p: ControlPolicy, c: SimConfig, path_index=0) -> PathRecord:
    """Simulate and record one path (the ``path_index`` stream of ``c.seed``)."""
    par = encode_policy(s, p)
    n = c.n_steps
    normals = path_rng(c.seed, path_index).standard_normal(n)
    zs, xi1, xi2, u1, u2 = (np.empty(n + 1) for _ in range(5))
    jt, jz, js = np.empty(n + 1), np.empty(n + 1), np.empty(n + 1)
    status, step, _, _, nj = K.run_path(float(c.z0), normals, float(c.dt), par, True,
                                        zs, xi1, xi2, u1, u2, jt, jz, js)
    if status != K.OK:
        raise SimulationError("non-finite state", step)
    owner = _controller_of_jumps(p)
    jumps, jump_from = [], []
    for i in range(nj):
        if owner is None:
            for who in (0, 1):
                jumps.append((float(jt[i]), who, 0.5 * float(js[i])))
                jump_from.append(float(jz[i]))
        else:
            jumps.append((float(jt[i]), owner, float(js[i])))
            jump_from.append(float(jz[i]))
    times = np.arange(n + 1) * c.dt
    return PathRecord(times, zs, xi1, xi2, u1, u2, jumps, jump_from)


_DUMMY = np.empty(1)


def _payoff_block(args):
    z0, dt, n_steps, seed, start, stop, par = args
    out = np.empty((stop - start, 2))
    for j, idx in enumerate(range(start, stop)):
        normals = path_rng(seed, idx).standard_normal(n_steps)
        status, step, v1, v2, _ = K.run_path(z0, normals, dt, par, False, _DUMMY, _DUMMY,
                                             _DUMMY, _DUMMY, _DUMMY, _DUMMY, _DUMMY, _DUMMY)
        if status != K.OK:
            raise SimulationError(f"non-finite state on path {idx}", step)
        out[j] = v1, v2
    return out


def simulate_payoffs(s: Scenario, p: ControlPolicy, c: SimConfig, workers=1) -> np.ndarray:
    """Discounted payoff of each player on every path, shape (n_paths, 2)."""
    par = encode_policy(s, p)
    blocks = [(float(c.z0), float(c.dt), c.n_steps, c.seed, a, min(a + CHUNK, c.n_paths), par)
              for a in range(0, c.n_paths, CHUNK)]
    if workers is None or workers <= 1 or len(blocks) == 1:
        parts = [_payoff_block(b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_payoff_block, blocks))
    return np.concatenate(parts, axis=0)


def estimate_payoff(s: Scenario, p: ControlPolicy, c: SimConfig, player=0,
                    workers=1) -> PayoffEstimate:
    """Sample mean and standard error of one player's discounted payoff."""
    if c.n_paths < 2:
        raise PreconditionError("need at least two paths for a standard error")
    if not 0 <= player < max(s.n_players, 1):
        raise PreconditionError(f"no player {player}")
    vals = simulate_payoffs(s, p, c, workers)[:, player]
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    bound = s.profit_of(player).pi_max * math.exp(-s.r * c.horizon) / s.r
    return PayoffEstimate(mean, se, c.n_paths, c.dt, c.horizon, bound)
