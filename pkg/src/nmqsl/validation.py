"""Self-checks behind ``nmqsl validate``.

Each check returns a :class:`Check` with status PASS, FAIL or INFO.  INFO
rows report a known discrepancy without failing the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import appendix_formulas, speedup
from .control import strategy_classB_flip, strategy_cool
from .geometry import BathSpec, BlochVector, purity
from .profiles import Constant, DampedCosine, DecayProfile, JaynesCummings, Tabulated, cp_check
from .propagator import integrate_oracle, propagate_closed

__all__ = ["Check", "random_case", "run_all", "oracle_deviation"]

PASS, FAIL, INFO = "PASS", "FAIL", "INFO"
SEED = 20240917


@dataclass(frozen=True)
class Check:
    name: str
    status: str
    detail: str

    def line(self) -> str:
        return f"{self.status:<4}  {self.name}: {self.detail}"


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


def random_state(rng: np.random.Generator) -> BlochVector:
    v = rng.normal(size=3)
    v *= rng.uniform() ** (1.0 / 3.0) / np.linalg.norm(v)
    return BlochVector.from_array(v)


MAX_AMPLIFICATION = 1e3


def amplification(profile: DecayProfile, bath: BathSpec, t0: float, t1: float, n: int = 512) -> float:
    """Worst growth factor exp(k (Lam(s) - Lam(t1))), s in [t0, t1], of a perturbation of the offset from the fixed point."""
    lam = np.asarray(profile.accumulated(np.linspace(t0, t1, n)), dtype=float)
    return float(np.exp(bath.gamma_sum * (lam.max() - lam[-1])))


def random_case(rng: np.random.Generator) -> tuple[BlochVector, DecayProfile, BathSpec, float, float]:
    """A random (state, profile, bath, t0, t1) with both times inside the profile's domain.

    The state is the evolved image at t0 of a random initial state.  Cases
    whose backflow would amplify rounding errors by more than
    MAX_AMPLIFICATION are redrawn, since there neither method is accurate.
    """
    while True:
        case = _draw(rng)
        if amplification(case[1], case[2], case[3], case[4]) <= MAX_AMPLIFICATION:
            return case


def _draw(rng: np.random.Generator) -> tuple[BlochVector, DecayProfile, BathSpec, float, float]:
    bath = BathSpec(float(rng.uniform(0.0, 4.0)))
    kind = rng.integers(4)
    if kind == 0:
        profile: DecayProfile = Constant(float(10 ** rng.uniform(-1, 1)))
    elif kind == 1:
        profile = JaynesCummings(float(10 ** rng.uniform(-2, 2)), float(10 ** rng.uniform(-2, 2)))
    elif kind == 2:
        # omega <= 2 zeta keeps the damped cosine completely positive
        zeta = float(10 ** rng.uniform(-1, 0.5))
        profile = DampedCosine(zeta, float(rng.uniform(0.0, 2.0 * zeta)))
    else:
        t = np.linspace(0.0, 3.0, 7)
        profile = Tabulated(t, rng.uniform(0.0, 2.0, size=t.size))
    span = 3.0 * profile.characteristic_time
    end = profile.domain_end
    if math.isfinite(end):
        span = min(span, 0.95 * end)
    if isinstance(profile, Tabulated):
        span = 3.0
    t0, t1 = sorted(rng.uniform(0.0, span, size=2).tolist())
    # the state at t0 must be one the dynamics can produce from t = 0
    state = propagate_closed(random_state(rng), profile, bath, 0.0, t0)
    return state, profile, bath, t0, t1


def oracle_deviation(n: int, tol: float = 1e-10, seed: int = SEED) -> float:
    """Largest Bloch-vector gap between closed-form and integrated propagation over ``n`` random cases."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        state, profile, bath, t0, t1 = random_case(rng)
        a = propagate_closed(state, profile, bath, t0, t1).as_array()
        b = integrate_oracle(state, profile, bath, t0, t1, tol=tol).as_array()
        worst = max(worst, float(np.linalg.norm(a - b)))
    return worst


def _appendix_checks() -> list[Check]:
    bath = BathSpec(2.0)
    eps = 0.01
    cool_state = BlochVector(0.3, 0.0, 0.4)
    heat_state = BlochVector(0.0, 0.0, 0.9)
    cases = [(JaynesCummings(r, 1.0), "M") for r in (1e3, 1e4)]
    cases.append((Constant(1.0), "M"))
    cases += [(JaynesCummings(100.0 * r, 100.0), "NM") for r in (1e-3, 1e-4)]
    out = []
    for profile, regime in cases:
        for strategy, state in (("cool", cool_state), ("heat", heat_state)):
            rep = speedup(state, profile, bath, eps, strategy)
            dev = rep.rel_dev_exact
            ok = dev is not None and abs(dev) <= 0.02
            out.append(
                Check(
                    f"{strategy}_{regime.lower()} exact form [{profile.to_spec()}]",
                    _status(ok),
                    f"t_qsl={rep.t_qsl:.6g} exact={rep.analytic.exact:.6g} dev={dev:+.2%}",
                )
            )
    nm = appendix_formulas("cool_nm", beta=2.0, eps=eps, gamma0=100.0, lam=0.01, r_i=cool_state.r)
    rep = speedup(cool_state, JaynesCummings(0.01, 100.0), bath, eps, "cool")
    out.append(
        Check(
            "cool_nm printed form (arccos linearized)",
            INFO,
            f"printed={nm.paper:.6g} simulated={rep.t_qsl:.6g} dev={rep.rel_dev_paper:+.1%}",
        )
    )
    return out


def _monotonicity_check(n: int, seed: int) -> Check:
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for _ in range(n):
        state = random_state(rng)
        bath = BathSpec(float(rng.uniform(0.0, 4.0)))
        profile = JaynesCummings(float(10 ** rng.uniform(0.5, 2)), float(10 ** rng.uniform(-1, 0)))
        ts = np.linspace(0.0, 5.0 * profile.characteristic_time, 400)
        fp = bath.fixed_point.as_array()
        d = [np.linalg.norm(propagate_closed(state, profile, bath, 0.0, t).as_array() - fp) for t in ts]
        worst = max(worst, float(np.max(np.diff(d))))
    return Check("markov monotonicity", _status(worst <= 1e-10), f"max increase {worst:.3g} over {n} states")


def _flip_check() -> Check:
    bath = BathSpec(2.0)
    state = BlochVector(0.3, 0.0, 0.4)
    profile = DampedCosine(1.0, 4.0, check_cp=False)
    res = strategy_classB_flip(state, profile, bath, 0.01)
    plain = strategy_cool(state, profile, bath, 0.01)
    p = res.trajectory.purities
    drop = float(np.min(np.diff(p))) if p.size > 1 else 0.0
    plain_t = math.inf if plain.t_qsl is None else plain.t_qsl
    ok = res.t_qsl is not None and res.t_qsl < plain_t and drop >= -1e-10
    return Check(
        "class-B flip strategy",
        _status(ok),
        f"t_flip={res.t_qsl:.6g} t_noflip={plain_t:.6g} min dP={drop:.3g}",
    )


def _cp_checks() -> list[Check]:
    out = []
    jc = [JaynesCummings(lam, g0) for lam in (0.01, 0.1, 1.0) for g0 in (0.1, 1.0, 100.0)]
    ok = all(cp_check(p, 1e3).ok for p in jc)
    out.append(Check("cp: JC before divergence", _status(ok), f"{len(jc)} profiles"))
    c = cp_check(DampedCosine(1.0, 2.0), 50.0)
    out.append(Check("cp: cos zeta=1 omega=2 on [0,50]", _status(c.ok), f"min Lambda={c.min_value:.3g}"))
    neg = cp_check(Tabulated(np.array([0.0, 1.0, 2.0]), np.array([-1.0, -1.0, -1.0])), 2.0)
    ok = not neg.ok and neg.witness is not None
    out.append(Check("cp: all-negative table rejected", _status(ok), f"witness t={neg.witness}"))
    return out


def _divergence_check() -> Check:
    p = JaynesCummings(0.01, 100.0)
    t = p.divergence_time()
    asym = math.pi / math.sqrt(2.0 * p.lam * p.gamma0)
    ok = abs(t - 2.23150) <= 1e-4 and abs(t - asym) / asym < 5e-3
    return Check("JC divergence time", _status(ok), f"T={t:.6f} asymptote={asym:.6f}")


def _purity_invariance_check(n: int, seed: int) -> Check:
    from .geometry import Rotation

    rng = np.random.default_rng(seed + 2)
    worst = 0.0
    for _ in range(n):
        s = random_state(rng)
        rot = Rotation(tuple(rng.normal(size=3)), float(rng.uniform(-7, 7)))
        worst = max(worst, abs(purity(rot.apply(s)) - purity(s)))
    return Check("rotation purity invariance", _status(worst <= 1e-12), f"max |dP|={worst:.3g}")


def run_all(tol: float = 1e-10, n_oracle: int = 100, n_states: int = 50) -> list[Check]:
    checks = _appendix_checks()
    dev = oracle_deviation(n_oracle, tol)
    limit = 100.0 * tol
    checks.append(
        Check(
            f"oracle equivalence (tol {tol:g})",
            _status(dev <= limit),
            f"max |dr|={dev:.3g} over {n_oracle} cases, limit {limit:.3g}",
        )
    )
    checks.append(_monotonicity_check(n_states, SEED))
    checks.append(_flip_check())
    checks += _cp_checks()
    checks.append(_divergence_check())
    checks.append(_purity_invariance_check(n_states, SEED))
    return checks
