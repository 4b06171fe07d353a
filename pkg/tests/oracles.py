"""Independent reference computations used by the tests.

Nothing here imports the closed forms under test: the Bloch equations are
integrated with scipy's DOP853 and accumulated rates come from
adaptive quadrature of gamma written out directly.
"""

import math
import warnings

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp
from scipy.optimize import brentq


def rfp(beta):
    return (math.exp(beta) - 1.0) / (math.exp(beta) + 1.0)


def gamma_jc(lam, gamma0, t):
    g2 = lam * lam - 2.0 * lam * gamma0
    if g2 > 0:
        g = math.sqrt(g2)
        # sinh and cosh scaled by 2 exp(-g t / 2) so large g t cannot overflow
        e = math.exp(-g * t)
        s, c = 1.0 - e, 1.0 + e
        return 2.0 * gamma0 * lam * s / (g * c + lam * s)
    gh = math.sqrt(-g2)
    s, c = math.sin(gh * t / 2), math.cos(gh * t / 2)
    return 2.0 * gamma0 * lam * s / (gh * c + lam * s)


def gamma_cos(zeta, omega, t):
    return math.exp(-zeta * t) * math.cos(omega * t)


def accumulated(gamma, t):
    # geometric sub-intervals resolve fast start-up transients on long spans
    edges = [0.0] + [t * 2.0**-k for k in range(40, -1, -1)]
    with warnings.catch_warnings():
        # roundoff notices on near-zero pieces; callers compare with their own tolerance
        warnings.simplefilter("ignore", IntegrationWarning)
        return sum(
            quad(gamma, a, b, epsabs=1e-14, epsrel=1e-12, limit=400)[0] for a, b in zip(edges[:-1], edges[1:])
        )


def bloch_rhs(gamma, beta):
    """Bloch equations of the amplitude-damping master equation, derived by hand."""
    k = 1.0 + math.exp(beta)
    zfp = -rfp(beta)

    def f(t, r):
        gm = gamma(t)
        return [-0.5 * k * gm * r[0], -0.5 * k * gm * r[1], -k * gm * (r[2] - zfp)]

    return f


def evolve(gamma, beta, r0, t1, t0=0.0):
    sol = solve_ivp(bloch_rhs(gamma, beta), (t0, t1), list(r0), method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[:, -1]


def distance_to_fp(r, beta):
    return math.sqrt(r[0] ** 2 + r[1] ** 2 + (r[2] + rfp(beta)) ** 2)


def first_time(fn, lo, hi, n=4000):
    """First root of ``fn`` on [lo, hi] located by scanning then Brent."""
    ts = np.linspace(lo, hi, n)
    prev = fn(ts[0])
    for a, b in zip(ts[:-1], ts[1:]):
        cur = fn(b)
        if prev > 0 >= cur or prev < 0 <= cur:
            return brentq(fn, a, b, xtol=1e-14)
        prev = cur
    return None
