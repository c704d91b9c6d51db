"""Compiled per-path Euler-Maruyama loop shared by path recording and payoff estimation.

Every policy is encoded as: rates of the form (a + b x - pi_src(x)) / d active
below ``cap``, plus an optional lift to ``lift_to`` whenever the state lands in
[lift_lo, lift_to).  A state that falls below ``lift_lo`` directly from the
controlled region is clamped back to ``lift_to`` (reflection).
"""

import math

import numpy as np
from numba import njit

# layout of the float parameter vector
MU, SIGMA, R, K1, K2 = 0, 1, 2, 3, 4
NU1, RHO1, XC1, NU2, RHO2, XC2 = 5, 6, 7, 8, 9, 10
LIFT_LO, LIFT_TO, SHARE1 = 11, 12, 13
CAP = 14
A1, B1, D1, SRC1 = 15, 16, 17, 18
A2, B2, D2, SRC2 = 19, 20, 21, 22
HAS_LIFT = 23
N_PARAMS = 24

OK, NONFINITE = 0, 1


@njit(cache=True)
def _profit(x, nu, rho, xc):
    if x >= xc:
        return 1.0 - math.exp(nu * x)
    return 1.0 - math.exp(nu * xc) + (x - xc) * rho


@njit(cache=True)
def _rate(x, par, a, b, d, src):
    if x >= par[CAP]:
        return 0.0
    if src == 0:
        p = _profit(x, par[NU1], par[RHO1], par[XC1])
    else:
        p = _profit(x, par[NU2], par[RHO2], par[XC2])
    return (par[a] + par[b] * x - p) / par[d]


@njit(cache=True)
def run_path(z0, normals, dt, par, record, zs, xi1s, xi2s, u1s, u2s, jt, jz, jsize):
    """Advance one path.

    Returns (status, step, payoff1, payoff2, n_jumps).  When ``record`` is
    true the state arrays (length n_steps + 1) and jump arrays are filled.
    """
    mu, sigma, r = par[MU], par[SIGMA], par[R]
    k1, k2 = par[K1], par[K2]
    share1 = par[SHARE1]
    has_lift = par[HAS_LIFT] > 0.5
    lift_lo, lift_to = par[LIFT_LO], par[LIFT_TO]
    src1, src2 = int(par[SRC1]), int(par[SRC2])
    sq = sigma * math.sqrt(dt)
    n = normals.shape[0]

    z = z0
    xi1 = 0.0
    xi2 = 0.0
    cost1 = 0.0
    cost2 = 0.0
    prof1 = 0.0
    prof2 = 0.0
    nj = 0

    if has_lift and z >= lift_lo and z < lift_to:
        push = lift_to - z
        if record:
            jt[nj] = 0.0
            jz[nj] = z
            jsize[nj] = push
        nj += 1
        xi1 += share1 * push
        xi2 += (1.0 - share1) * push
        cost1 += k1 * share1 * push
        cost2 += k2 * (1.0 - share1) * push
        z = lift_to

    disc = 1.0
    p1 = _profit(z, par[NU1], par[RHO1], par[XC1])
    p2 = _profit(z, par[NU2], par[RHO2], par[XC2])
    for i in range(n):
        u1 = _rate(z, par, A1, B1, D1, src1)
        u2 = _rate(z, par, A2, B2, D2, src2)
        if record:
            zs[i] = z
            xi1s[i] = xi1
            xi2s[i] = xi2
            u1s[i] = u1
            u2s[i] = u2
        cost1 += disc * k1 * u1 * dt
        cost2 += disc * k2 * u2 * dt
        xi1 += u1 * dt
        xi2 += u2 * dt
        znew = z + (mu + u1 + u2) * dt + sq * normals[i]
        if not math.isfinite(znew):
            return NONFINITE, i, 0.0, 0.0, nj
        disc_new = math.exp(-r * (i + 1) * dt)
        if has_lift and znew < lift_to:
            push = 0.0
            if znew >= lift_lo:
                push = lift_to - znew
                if z < lift_lo:
                    # entered the lift region from below: a genuine jump
                    if record:
                        jt[nj] = (i + 1) * dt
                        jz[nj] = znew
                        jsize[nj] = push
                    nj += 1
            elif z >= lift_lo:
                push = lift_to - znew
            if push > 0.0:
                xi1 += share1 * push
                xi2 += (1.0 - share1) * push
                cost1 += disc_new * k1 * share1 * push
                cost2 += disc_new * k2 * (1.0 - share1) * push
                znew = lift_to
        q1 = _profit(znew, par[NU1], par[RHO1], par[XC1])
        q2 = _profit(znew, par[NU2], par[RHO2], par[XC2])
        prof1 += 0.5 * dt * (disc * p1 + disc_new * q1)
        prof2 += 0.5 * dt * (disc * p2 + disc_new * q2)
        z, p1, p2, disc = znew, q1, q2, disc_new

    if record:
        zs[n] = z
        xi1s[n] = xi1
        xi2s[n] = xi2
        u1s[n] = _rate(z, par, A1, B1, D1, src1)
        u2s[n] = _rate(z, par, A2, B2, D2, src2)
    return OK, n, prof1 - cost1, prof2 - cost2, nj


def empty_params():
    par = np.zeros(N_PARAMS)
    par[XC1] = par[XC2] = -np.inf
    par[CAP] = -np.inf
    par[D1] = par[D2] = 1.0
    par[SRC2] = 1.0
    par[LIFT_LO] = -np.inf
    par[SHARE1] = 1.0
    return par
