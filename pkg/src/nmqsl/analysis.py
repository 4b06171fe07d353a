"""Free-evolution times, speedup ratios and the closed-form limits they are checked against.

The speedup of a strategy is R = T_F / T_QSL, the free-evolution time to the
eps-ball divided by the controlled time.  :func:`appendix_formulas` returns
both the asymptotic expressions as usually printed and exact counterparts
obtained by inverting the closed-form propagator; the two differ where the
printed form linearizes an arccos or uses a different exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .classification import Classification, classify
from .control import (
    StrategyResult,
    strategy_classB_flip,
    strategy_cool,
    strategy_free,
    strategy_heat,
)
from .geometry import BathSpec, BlochVector
from .profiles import Constant, DampedCosine, DecayProfile, JaynesCummings
from .propagator import hit_time, lambda_to_ball

__all__ = [
    "QslReport",
    "AppendixValue",
    "STRATEGIES",
    "REPORT_COLUMNS",
    "t_free",
    "speedup",
    "appendix_formulas",
    "regime_of",
    "loglog_slope",
    "regime_report",
    "RegimeReport",
]

DEEP_M = 1e3
DEEP_NM = 1e-3

STRATEGIES: dict[str, Callable[..., StrategyResult]] = {
    "cool": strategy_cool,
    "heat": strategy_heat,
    "flip": strategy_classB_flip,
    "free": strategy_free,
}

REPORT_COLUMNS = (
    "lambda",
    "gamma0",
    "omega",
    "beta",
    "eps",
    "class",
    "markovian",
    "t_free",
    "t_qsl",
    "R",
    "analytic_exact",
    "analytic_paper",
    "rel_dev_exact",
    "rel_dev_paper",
    "bound_only",
)


def t_free(
    initial: BlochVector, profile: DecayProfile, bath: BathSpec, eps: float
) -> float | None:
    """Free-evolution time to the eps-ball; capped by the divergence time on the JC NM branch."""
    t = hit_time(initial, profile, bath, eps)
    if isinstance(profile, JaynesCummings) and profile.branch == "NM":
        t_div = profile.divergence_time()
        t = t_div if t is None else min(t, t_div)
    return t


# ------------------------------------------------------------ appendix forms


@dataclass(frozen=True)
class AppendixValue:
    kind: str
    paper: float | None
    exact: float
    in_regime: bool

    @property
    def paper_vs_exact(self) -> float | None:
        if self.paper is None:
            return None
        return (self.paper - self.exact) / self.exact


def _rel(a: float | None, b: float | None) -> float | None:
    if a is None or b is None or b == 0.0:
        return None
    return (a - b) / b


APPENDIX_KINDS = (
    "cool_m",
    "cool_nm",
    "heat_m",
    "heat_nm",
    "free_m",
    "free_nm",
    "gain_heat_m",
    "gain_heat_nm",
)


def appendix_formulas(
    kind: str,
    *,
    beta: float,
    eps: float,
    gamma0: float,
    lam: float | None = None,
    r_i: float | None = None,
    state: BlochVector | None = None,
) -> AppendixValue:
    """Evaluate an asymptotic relaxation time (or heating gain) two ways.

    ``kind`` is one of ``cool_m``, ``cool_nm``, ``heat_m``, ``heat_nm``,
    ``free_m``, ``free_nm``, ``gain_heat_m``, ``gain_heat_nm``.  The ``_m``
    forms assume gamma ~ gamma0 (``lam`` omitted or lam/gamma0 >= 1e3); the
    ``_nm`` forms assume lam/gamma0 <= 1e-3 and need ``lam``.  Cooling and
    heating take the initial radius ``r_i``; free evolution and the gains
    need the full initial ``state``.  Out-of-regime inputs are evaluated
    anyway and flagged through ``in_regime``.

    The exact Markovian forms include the start-up lag of the JC rate,
    2 ln((lam + g) / 2g) / gamma_inf, which vanishes for a constant rate; the
    exact non-Markovian forms use g_hat = sqrt(2 lam gamma0 - lam^2).
    """
    if kind not in APPENDIX_KINDS:
        raise ValueError(f"unknown appendix kind {kind!r}; expected one of {APPENDIX_KINDS}")
    bath = BathSpec(beta)
    k = bath.gamma_sum
    rfp = bath.rfp_magnitude
    nm = kind.endswith("_nm")
    if nm:
        if lam is None:
            raise ValueError(f"{kind} needs lam")
        in_regime = lam / gamma0 <= DEEP_NM
        g_hat = math.sqrt(2.0 * lam * gamma0 - lam * lam) if 2.0 * gamma0 > lam else math.nan
        pref_paper = math.sqrt(2.0 / (lam * gamma0))
        pref_exact = 2.0 / g_hat
    else:
        in_regime = lam is None or lam / gamma0 >= DEEP_M
        if lam is not None and lam > 2.0 * gamma0:
            # long-time JC asymptote: Lam(t) = rate_inf (t - lag)
            g = math.sqrt(lam * lam - 2.0 * lam * gamma0)
            rate_inf = 2.0 * lam * gamma0 / (lam + g)
            lag = 2.0 * math.log((lam + g) / (2.0 * g)) / rate_inf
        else:
            rate_inf, lag = gamma0, 0.0

        def m_exact(need: float) -> float:
            return need / rate_inf + lag
    if kind.startswith(("cool", "heat")) or kind.startswith("gain"):
        if r_i is None:
            if state is None:
                raise ValueError(f"{kind} needs r_i or state")
            r_i = state.r
    if kind.startswith(("free", "gain")) and state is None:
        raise ValueError(f"{kind} needs the initial state")

    if kind == "cool_m":
        need = math.log((rfp - r_i) / eps) / k
        return AppendixValue(kind, need / gamma0, m_exact(need), in_regime)
    if kind == "cool_nm":
        x = (eps / (rfp - r_i)) ** (1.0 / (2.0 * k))
        return AppendixValue(
            kind, pref_paper * (0.5 * math.pi - x), pref_exact * math.acos(x), in_regime
        )
    if kind == "heat_m":
        need = math.log((rfp + r_i) / (2.0 * rfp + eps)) / k
        return AppendixValue(kind, need / gamma0, m_exact(need), in_regime)
    if kind == "heat_nm":
        y = ((2.0 * rfp + eps) / (r_i + rfp)) ** (1.0 / (2.0 * k))
        return AppendixValue(kind, pref_paper * math.acos(y), pref_exact * math.acos(y), in_regime)

    need_free = lambda_to_ball(state, bath, eps)
    r_x = math.hypot(state.rx, state.ry)
    if kind == "free_m":
        paper = 2.0 / (gamma0 * k) * math.log(r_x / eps) if r_x > 0 else None
        return AppendixValue(kind, paper, m_exact(need_free), in_regime)
    if kind == "free_nm":
        paper = pref_paper * (0.5 * math.pi - (eps / r_x) ** (2.0 / k)) if r_x > 0 else None
        return AppendixValue(kind, paper, pref_exact * math.acos(math.exp(-0.5 * need_free)), in_regime)

    need_heat = math.log((rfp + r_i) / (2.0 * rfp + eps)) / k
    if kind == "gain_heat_m":
        paper = 2.0 * abs(math.log(eps)) / math.log((rfp + r_i) / (2.0 * rfp))
        return AppendixValue(kind, paper, m_exact(need_free) / m_exact(need_heat), in_regime)
    # gain_heat_nm
    y0 = (2.0 * rfp / (r_i + rfp)) ** (1.0 / (2.0 * k))
    paper = 0.5 * math.pi / math.acos(y0)
    y = math.exp(-0.5 * need_heat)
    exact = math.acos(math.exp(-0.5 * need_free)) / math.acos(y)
    return AppendixValue(kind, paper, exact, in_regime)


def regime_of(profile: DecayProfile) -> str | None:
    """'M' or 'NM' when the profile sits in a limit covered by the closed forms."""
    if isinstance(profile, Constant):
        return "M"
    if isinstance(profile, JaynesCummings):
        ratio = profile.lam / profile.gamma0
        if ratio >= DEEP_M:
            return "M"
        if ratio <= DEEP_NM:
            return "NM"
    return None


def _analytic(
    strategy: str, profile: DecayProfile, bath: BathSpec, initial: BlochVector, eps: float
) -> AppendixValue | None:
    """Closed-form prediction for ``strategy``'s controlled time, when one applies."""
    if strategy not in ("cool", "heat", "free"):
        return None
    rfp = bath.rfp_magnitude
    r = initial.r
    if strategy == "cool" and not r < rfp - eps:
        return None
    if strategy == "heat" and not r > rfp + eps:
        return None
    if isinstance(profile, DampedCosine) and profile.omega == 0.0:
        # Lam(t) = (1 - exp(-zeta t)) / zeta inverts directly
        k = bath.gamma_sum
        if strategy == "cool":
            need = math.log((rfp - r) / eps) / k
        elif strategy == "heat":
            need = math.log((r + rfp) / (2.0 * rfp + eps)) / k
        else:
            need = lambda_to_ball(initial, bath, eps)
        z = profile.zeta
        exact = -math.log1p(-z * need) / z if z * need < 1.0 else math.inf
        return AppendixValue(f"{strategy}_cos0", None, exact, True)
    regime = regime_of(profile)
    if regime is None:
        return None
    lam = profile.lam if isinstance(profile, JaynesCummings) else None
    kind = f"{strategy}_{regime.lower()}"
    return appendix_formulas(
        kind, beta=bath.beta, eps=eps, gamma0=profile.gamma0, lam=lam, r_i=r, state=initial
    )


# --------------------------------------------------------------- reports


@dataclass(frozen=True)
class QslReport:
    strategy: str
    beta: float
    eps: float
    t_free: float | None
    t_qsl: float | None
    ratio: float | None
    classification: Classification
    bound_only: bool = False
    analytic: AppendixValue | None = None
    lam: float | None = None
    gamma0: float | None = None
    omega: float | None = None

    # deviations are (formula - simulated) / simulated

    @property
    def rel_dev_exact(self) -> float | None:
        return None if self.analytic is None else _rel(self.analytic.exact, self.t_qsl)

    @property
    def rel_dev_paper(self) -> float | None:
        return None if self.analytic is None else _rel(self.analytic.paper, self.t_qsl)

    def row(self) -> dict:
        a = self.analytic
        return {
            "lambda": self.lam,
            "gamma0": self.gamma0,
            "omega": self.omega,
            "beta": self.beta,
            "eps": self.eps,
            "class": self.classification.dynamics_class.value,
            "markovian": self.classification.markovian,
            "t_free": self.t_free,
            "t_qsl": self.t_qsl,
            "R": self.ratio,
            "analytic_exact": None if a is None else a.exact,
            "analytic_paper": None if a is None else a.paper,
            "rel_dev_exact": self.rel_dev_exact,
            "rel_dev_paper": self.rel_dev_paper,
            "bound_only": self.bound_only,
        }

    def as_dict(self) -> dict:
        d = self.row()
        d["strategy"] = self.strategy
        d["tag"] = "LOWER_BOUND" if self.bound_only else "EXACT"
        d["t_first_sign_change"] = self.classification.t_first_sign_change
        d["analytic_kind"] = None if self.analytic is None else self.analytic.kind
        return d


def _profile_params(profile: DecayProfile) -> dict:
    if isinstance(profile, JaynesCummings):
        return {"lam": profile.lam, "gamma0": profile.gamma0}
    if isinstance(profile, Constant):
        return {"gamma0": profile.gamma0}
    if isinstance(profile, DampedCosine):
        return {"omega": profile.omega}
    return {}


def speedup(
    initial: BlochVector,
    profile: DecayProfile,
    bath: BathSpec,
    eps: float,
    strategy: str = "cool",
) -> QslReport:
    """Run ``strategy`` and free evolution and assemble R = T_F / T_QSL.

    R is None whenever either time is undefined (target never reached).
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {sorted(STRATEGIES)}")
    cls = classify(profile, bath, initial, eps)
    tf = t_free(initial, profile, bath, eps)
    res = STRATEGIES[strategy](initial, profile, bath, eps)
    tq = res.t_qsl
    if strategy == "free":
        tq = tf
    ratio = None
    if tf is not None and tq is not None and tq > 0.0:
        ratio = tf / tq
    return QslReport(
        strategy,
        bath.beta,
        eps,
        tf,
        tq,
        ratio,
        cls,
        res.bound_only,
        _analytic(strategy, profile, bath, initial, eps),
        **_profile_params(profile),
    )


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass
class RegimeReport:
    reports: list[QslReport]
    slopes: dict[str, float] = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [r.row() for r in self.reports]


def regime_report(
    profiles: Iterable[DecayProfile],
    bath: BathSpec,
    initial: BlochVector,
    eps: float,
    strategy: str = "cool",
) -> RegimeReport:
    """Per-point reports over a profile grid plus T_QSL scaling fits.

    Slopes are fitted on log T_QSL versus log gamma0 separately for the deep
    Markovian (lam/gamma0 >= 1e3) and deep non-Markovian (<= 1e-3) points
    sharing a lambda value, and versus log lambda at fixed gamma0 in the
    non-Markovian corner; a fit is reported only with at least three points.
    """
    reports = [speedup(initial, p, bath, eps, strategy) for p in profiles]
    slopes: dict[str, float] = {}
    jc = [r for r in reports if r.lam is not None and r.t_qsl]
    for label, pick in (
        ("gamma0_deep_M", lambda r: r.lam / r.gamma0 >= DEEP_M),
        ("gamma0_deep_NM", lambda r: r.lam / r.gamma0 <= DEEP_NM),
    ):
        by_lam: dict[float, list[QslReport]] = {}
        for r in jc:
            if pick(r):
                by_lam.setdefault(r.lam, []).append(r)
        fits = [
            loglog_slope([r.gamma0 for r in grp], [r.t_qsl for r in grp])
            for grp in by_lam.values()
            if len(grp) >= 3
        ]
        if fits:
            slopes[label] = float(np.mean(fits))
    by_g0: dict[float, list[QslReport]] = {}
    for r in jc:
        if r.lam / r.gamma0 <= DEEP_NM:
            by_g0.setdefault(r.gamma0, []).append(r)
    fits = [
        loglog_slope([r.lam for r in grp], [r.t_qsl for r in grp])
        for grp in by_g0.values()
        if len(grp) >= 3
    ]
    if fits:
        slopes["lambda_deep_NM"] = float(np.mean(fits))
    return RegimeReport(reports, slopes)
