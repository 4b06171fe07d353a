"""Time-dependent decay rates gamma(t) and their accumulated integrals.

Every profile exposes ``gamma(t)`` and ``accumulated(t)`` (the integral of
gamma from 0 to t).  Closed forms are used wherever they exist; the state map
only ever needs differences of the accumulated rate, which is what makes a
rate divergence harmless downstream.

Profiles can be built from a short text grammar::

    jc:lambda=0.01,gamma0=100
    const:gamma0=1
    cos:zeta=1,omega=2
    table:rates.txt          # two columns "t gamma", strictly increasing t
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError

__all__ = [
    "DecayProfile",
    "Constant",
    "JaynesCummings",
    "DampedCosine",
    "Tabulated",
    "CPCheck",
    "gamma_at",
    "accumulated_rate",
    "cp_check",
    "divergence_time",
    "parse_profile",
    "ZERO_RTOL",
    "DIVERGENCE_LIKE",
]

ArrayLike = Union[float, np.ndarray]

# |gamma| below ZERO_RTOL * max|gamma| counts as zero when looking for sign changes
ZERO_RTOL = 1e-12
CP_TOL = 1e-12
# tabulated rates above this magnitude are reported as divergence-like
DIVERGENCE_LIKE = 1e6
# |g^2| below this fraction of lambda^2 uses the critical-damping limit
BRANCH_RTOL = 1e-12


def _out(x: np.ndarray, scalar: bool) -> ArrayLike:
    return float(x) if scalar else x


class DecayProfile:
    """Base class for gamma(t) families."""

    family: str = ""

    @property
    def domain_end(self) -> float:
        """First time at which the profile stops being defined (inf if never)."""
        return math.inf

    @property
    def markovian(self) -> bool:
        """True when gamma(t) >= 0 for every t in the domain and beyond."""
        raise NotImplementedError

    @property
    def characteristic_time(self) -> float:
        raise NotImplementedError

    def default_horizon(self) -> float:
        return 10.0 * self.characteristic_time

    def gamma(self, t: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def accumulated(self, t: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def sign_changes(self, horizon: float) -> list[float]:
        """Times in (0, horizon] where gamma changes sign, ascending."""
        raise NotImplementedError

    def accumulated_sup(self, horizon: float = math.inf) -> float:
        """Supremum of the accumulated rate over [0, horizon]."""
        raise NotImplementedError

    def to_spec(self) -> str:
        raise NotImplementedError

    def _check_t(self, t: ArrayLike) -> tuple[np.ndarray, bool]:
        if isinstance(t, (float, int)):
            if not 0.0 <= t < self.domain_end:
                raise DomainError(
                    f"{self.family}: t = {t!r} is outside the domain [0, {self.domain_end:.9g})"
                )
            return np.float64(t), True
        scalar = np.ndim(t) == 0
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0.0) or np.any(~np.isfinite(arr)):
            raise DomainError(f"{self.family}: time must be finite and >= 0")
        if np.any(arr >= self.domain_end):
            raise DomainError(
                f"{self.family}: t = {float(np.max(arr)):.9g} is at or past the "
                f"end of the domain {self.domain_end:.9g}"
            )
        return arr, scalar


@dataclass(frozen=True)
class Constant(DecayProfile):
    gamma0: float
    family: str = field(default="const", init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.gamma0 > 0.0:
            raise ValueError(f"gamma0 must be > 0, got {self.gamma0}")

    @property
    def markovian(self) -> bool:
        return True

    @property
    def characteristic_time(self) -> float:
        return 1.0 / self.gamma0

    def gamma(self, t: ArrayLike) -> ArrayLike:
        arr, scalar = self._check_t(t)
        return _out(np.full_like(arr, self.gamma0), scalar)

    def accumulated(self, t: ArrayLike) -> ArrayLike:
        arr, scalar = self._check_t(t)
        return _out(self.gamma0 * arr, scalar)

    def sign_changes(self, horizon: float) -> list[float]:
        return []

    def accumulated_sup(self, horizon: float = math.inf) -> float:
        return self.gamma0 * horizon

    def to_spec(self) -> str:
        return f"const:gamma0={self.gamma0!r}"


@dataclass(frozen=True)
class JaynesCummings(DecayProfile):
    """Damped Jaynes-Cummings rate with spectral width ``lam`` and coupling ``gamma0``.

    g = sqrt(lam^2 - 2 gamma0 lam) is real for lam > 2 gamma0 (Markovian) and
    imaginary otherwise; on the imaginary branch gamma(t) diverges at a finite
    time and the profile is undefined from there on.
    """

    lam: float
    gamma0: float
    family: str = field(default="jc", init=False, repr=False)

    def __post_init__(self) -> None:
        if not (self.lam > 0.0 and self.gamma0 > 0.0):
            raise ValueError(f"lambda and gamma0 must be > 0, got {self.lam}, {self.gamma0}")

    @property
    def g_squared(self) -> float:
        return self.lam * (self.lam - 2.0 * self.gamma0)

    @property
    def branch(self) -> str:
        g2 = self.g_squared
        if abs(g2) < BRANCH_RTOL * self.lam**2:
            return "critical"
        return "M" if g2 > 0.0 else "NM"

    @property
    def g(self) -> float:
        """|g|: the real root on the M branch, the frequency g-hat on the NM branch."""
        return math.sqrt(abs(self.g_squared))

    @property
    def markovian(self) -> bool:
        # exact boundary; the critical band only selects the evaluation formula
        return self.lam >= 2.0 * self.gamma0

    @property
    def domain_end(self) -> float:
        return self.divergence_time() if self.branch == "NM" else math.inf

    @property
    def characteristic_time(self) -> float:
        return max(1.0 / self.lam, 1.0 / math.sqrt(2.0 * self.lam * self.gamma0))

    def asymptotic_rate(self) -> float:
        """Long-time limit of gamma on the Markovian branch."""
        if self.branch == "NM":
            raise DomainError("no long-time limit on the non-Markovian branch")
        return 2.0 * self.lam * self.gamma0 / (self.g + self.lam)

    def divergence_time(self) -> float:
        """First pole of gamma(t): (2/g_hat)(pi - arctan(g_hat/lambda))."""
        if self.branch != "NM":
            raise DomainError("the rate only diverges on the non-Markovian branch")
        gh = self.g
        return 2.0 / gh * (math.pi - math.atan2(gh, self.lam))

    def gamma(self, t: ArrayLike) -> ArrayLike:
        arr, scalar = self._check_t(t)
        lam, g0 = self.lam, self.gamma0
        branch = self.branch
        if branch == "critical":
            out = 2.0 * lam * g0 * arr / (2.0 + lam * arr)
        elif branch == "M":
            g = self.g
            th = np.tanh(0.5 * g * arr)
            out = 2.0 * lam * g0 * th / (g + lam * th)
        else:
            gh = self.g
            a = 0.5 * gh * arr
            s = np.sin(a)
            out = 2.0 * lam * g0 * s / (gh * np.cos(a) + lam * s)
        return _out(out, scalar)

    def accumulated(self, t: ArrayLike) -> ArrayLike:
        # -2 ln|G(t)| with G = e^{-lam t/2} [cosh(gt/2) + (lam/g) sinh(gt/2)]
        arr, scalar = self._check_t(t)
        lam = self.lam
        branch = self.branch
        if branch == "critical":
            out = lam * arr - 2.0 * np.log1p(0.5 * lam * arr)
        elif branch == "M":
            g = self.g
            lam_minus_g = 2.0 * self.gamma0 * lam / (lam + g)
            out = lam_minus_g * arr - 2.0 * np.log1p(
                0.5 * (lam_minus_g / g) * -np.expm1(-g * arr)
            )
        else:
            gh = self.g
            a = 0.5 * gh * arr
            inner = -2.0 * np.sin(0.5 * a) ** 2 + (lam / gh) * np.sin(a)
            # G -> 0 at the divergence; rounding may overshoot, Lam is +inf there
            with np.errstate(divide="ignore"):
                out = lam * arr - 2.0 * np.log1p(np.maximum(inner, -1.0))
        return _out(out, scalar)

    def sign_changes(self, horizon: float) -> list[float]:
        if self.branch != "NM":
            return []
        tf = self.divergence_time()
        return [tf] if tf <= horizon else []

    def accumulated_sup(self, horizon: float = math.inf) -> float:
        if self.branch == "NM":
            if horizon >= self.divergence_time():
                return math.inf
            return float(self.accumulated(horizon))
        return math.inf if math.isinf(horizon) else float(self.accumulated(horizon))

    def to_spec(self) -> str:
        return f"jc:lambda={self.lam!r},gamma0={self.gamma0!r}"


@dataclass(frozen=True)
class DampedCosine(DecayProfile):
    """gamma(t) = exp(-zeta t) cos(omega t).

    Construction fails if the accumulated rate ever dips below zero, which
    for this family can only happen at its first local minimum
    t = 3 pi / (2 omega).  ``check_cp=False`` skips that test; such profiles
    are only meaningful for lower-bound schedules that already assume the
    rate is unaffected by intermediate pulses.
    """

    zeta: float
    omega: float
    check_cp: bool = field(default=True, compare=False)
    family: str = field(default="cos", init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.zeta > 0.0:
            raise ValueError(f"zeta must be > 0, got {self.zeta}")
        if not self.omega >= 0.0:
            raise ValueError(f"omega must be >= 0, got {self.omega}")
        if self.omega > 0.0 and self.check_cp:
            t_min = 1.5 * math.pi / self.omega
            # for tiny omega the first minimum is at t = inf, where Lambda > 0
            if math.isfinite(t_min) and self.accumulated(t_min) < -CP_TOL:
                raise ValueError(
                    f"cos profile zeta={self.zeta}, omega={self.omega} violates complete "
                    f"positivity: accumulated rate {self.accumulated(t_min):.3g} at t={t_min:.6g}"
                )

    @property
    def markovian(self) -> bool:
        # a subnormal omega puts the first zero of gamma beyond every float
        return self.omega == 0.0 or not math.isfinite(0.5 * math.pi / self.omega)

    @property
    def characteristic_time(self) -> float:
        period = 1.0 / self.omega if self.omega > 0.0 else math.inf
        # a subnormal omega has no finite period; the decay sets the scale
        return max(1.0 / self.zeta, period) if math.isfinite(period) else 1.0 / self.zeta

    def gamma(self, t: ArrayLike) -> ArrayLike:
        arr, scalar = self._check_t(t)
        return _out(np.exp(-self.zeta * arr) * np.cos(self.omega * arr), scalar)

    def accumulated(self, t: ArrayLike) -> ArrayLike:
        arr, scalar = self._check_t(t)
        z, w = self.zeta, self.omega
        if w == 0.0:
            out = -np.expm1(-z * arr) / z
        else:
            wt = w * arr
            out = (z + np.exp(-z * arr) * (w * np.sin(wt) - z * np.cos(wt))) / (z * z + w * w)
        return _out(out, scalar)

    def accumulated_limit(self) -> float:
        return self.zeta / (self.zeta**2 + self.omega**2)

    def sign_changes(self, horizon: float) -> list[float]:
        if self.omega == 0.0:
            return []
        out = []
        n = 0
        while True:
            t = (2 * n + 1) * math.pi / (2.0 * self.omega)
            if t > horizon or not math.isfinite(t):
                return out
            out.append(t)
            n += 1

    def accumulated_sup(self, horizon: float = math.inf) -> float:
        if self.omega == 0.0:
            return self.accumulated_limit() if math.isinf(horizon) else float(self.accumulated(horizon))
        # local maxima decrease with time, so the first one (or the horizon) wins
        first_max = 0.5 * math.pi / self.omega
        t = min(first_max, horizon)
        return float(self.accumulated(t)) if math.isfinite(t) else self.accumulated_limit()

    def cp_margin(self) -> float:
        """Global minimum of the accumulated rate (0 when it never dips below)."""
        t_min = 1.5 * math.pi / self.omega if self.omega > 0.0 else math.inf
        if not math.isfinite(t_min):
            return 0.0
        return min(0.0, float(self.accumulated(t_min)))

    def to_spec(self) -> str:
        return f"cos:zeta={self.zeta!r},omega={self.omega!r}"


@dataclass(frozen=True, eq=False)
class Tabulated(DecayProfile):
    """Sampled rate, linearly interpolated; the integral is exact for the interpolant.

    ``times`` must start at 0 and increase strictly.  When ``sign_resolution``
    is given, neighbouring samples of opposite sign further apart than that
    are rejected, since the crossing would be poorly resolved.
    """

    times: np.ndarray
    rates: np.ndarray
    sign_resolution: float | None = None
    source: str | None = None
    family: str = field(default="table", init=False, repr=False)
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        g = np.asarray(self.rates, dtype=float)
        if t.ndim != 1 or t.shape != g.shape or t.size < 2:
            raise ValueError("table needs at least two (t, gamma) samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(g))):
            raise ValueError("table contains non-finite values")
        if t[0] != 0.0:
            raise ValueError(f"table must start at t = 0, got {t[0]}")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("table times must be strictly increasing")
        if self.sign_resolution is not None:
            flips = np.sign(g[:-1]) * np.sign(g[1:]) < 0
            gaps = np.diff(t)[flips]
            if gaps.size and gaps.max() > self.sign_resolution:
                raise ValueError(
                    f"sign change between samples {gaps.max():.3g} apart exceeds "
                    f"resolution {self.sign_resolution}"
                )
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(t))])
        t.setflags(write=False)
        g.setflags(write=False)
        cum.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "rates", g)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def from_file(cls, path: str | Path, sign_resolution: float | None = None) -> "Tabulated":
        data = np.loadtxt(path, dtype=float, ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns 't gamma'")
        return cls(data[:, 0], data[:, 1], sign_resolution, source=str(path))

    @property
    def domain_end(self) -> float:
        # inclusive end handled in _check_t
        return math.inf

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def markovian(self) -> bool:
        scale = float(np.max(np.abs(self.rates)))
        return bool(np.all(self.rates >= -ZERO_RTOL * scale))

    @property
    def divergence_like(self) -> bool:
        return float(np.max(np.abs(self.rates))) > DIVERGENCE_LIKE

    @property
    def characteristic_time(self) -> float:
        scale = float(np.max(np.abs(self.rates)))
        return self.t_end / 10.0 if scale == 0.0 else min(self.t_end / 10.0, 1.0 / scale)

    def default_horizon(self) -> float:
        return self.t_end

    def _check_t(self, t: ArrayLike) -> tuple[np.ndarray, bool]:
        arr, scalar = super()._check_t(t)
        if np.any(arr > self.t_end * (1.0 + 1e-15)):
            raise DomainError(
                f"table: t = {float(np.max(arr)):.9g} beyond last sample {self.t_end:.9g}"
            )
        return np.minimum(arr, self.t_end), scalar

    def gamma(self, t: ArrayLike) -> ArrayLike:
        arr, scalar = self._check_t(t)
        return _out(np.interp(arr, self.times, self.rates), scalar)

    def accumulated(self, t: ArrayLike) -> ArrayLike:
        arr, scalar = self._check_t(t)
        tt, gg = self.times, self.rates
        i = np.clip(np.searchsorted(tt, arr, side="right") - 1, 0, tt.size - 2)
        h = tt[i + 1] - tt[i]
        s = arr - tt[i]
        out = self._cum[i] + gg[i] * s + (gg[i + 1] - gg[i]) * s * s / (2.0 * h)
        return _out(out, scalar)

    def sign_changes(self, horizon: float) -> list[float]:
        tt, gg = self.times, self.rates
        scale = float(np.max(np.abs(gg)))
        if scale == 0.0:
            return []
        sgn = np.where(np.abs(gg) <= ZERO_RTOL * scale, 0, np.sign(gg)).astype(int)
        out: list[float] = []
        last_i, last_s = None, 0
        for i, s in enumerate(sgn):
            if s == 0:
                continue
            if last_s and s != last_s:
                j = last_i
                if sgn[j + 1] == 0:
                    tc = float(tt[j + 1])
                else:
                    tc = float(tt[j] + (tt[j + 1] - tt[j]) * gg[j] / (gg[j] - gg[j + 1]))
                if tc > horizon:
                    break
                out.append(tc)
            last_i, last_s = i, s
        return out

    def accumulated_sup(self, horizon: float = math.inf) -> float:
        end = min(horizon, self.t_end)
        pts = [0.0, *self.sign_changes(end), end]
        return max(float(self.accumulated(t)) for t in pts)

    def to_spec(self) -> str:
        if self.source is None:
            raise ValueError("in-memory table has no spec string")
        return f"table:{self.source}"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tabulated):
            return NotImplemented
        return bool(
            np.array_equal(self.times, other.times) and np.array_equal(self.rates, other.rates)
        )

    __hash__ = None  # type: ignore[assignment]


def gamma_at(profile: DecayProfile, t: ArrayLike) -> ArrayLike:
    return profile.gamma(t)


def accumulated_rate(profile: DecayProfile, t: ArrayLike) -> ArrayLike:
    return profile.accumulated(t)


def divergence_time(profile: JaynesCummings) -> float:
    if not isinstance(profile, JaynesCummings):
        raise DomainError(f"{profile.family} profiles have no divergence time")
    return profile.divergence_time()


def analysis_end(profile: DecayProfile, horizon: float) -> float:
    """Clamp ``horizon`` to the last time at which the profile may be evaluated."""
    end = profile.domain_end
    if isinstance(profile, Tabulated):
        return min(horizon, profile.t_end)
    if horizon >= end:
        return math.nextafter(end, 0.0)
    return horizon


@dataclass(frozen=True)
class CPCheck:
    ok: bool
    min_value: float
    argmin: float
    witness: float | None = None

    def __bool__(self) -> bool:
        return self.ok


def cp_check(profile: DecayProfile, horizon: float) -> CPCheck:
    """Check that the accumulated rate stays >= 0 on [0, horizon].

    Between consecutive sign changes of gamma the accumulated rate is
    monotone, so it suffices to inspect those instants and the endpoints.
    The witness is the first time at which the integral drops below -1e-12.
    Horizons reaching a divergence are clamped to just before it.
    """
    if not horizon > 0.0:
        raise ValueError("horizon must be > 0")
    end = analysis_end(profile, horizon)
    pts = [0.0, *[t for t in profile.sign_changes(end) if t < end], end]
    vals = [float(profile.accumulated(t)) for t in pts]
    k = int(np.argmin(vals))
    if vals[k] >= -CP_TOL:
        return CPCheck(True, vals[k], pts[k])
    j = next(i for i, v in enumerate(vals) if v < -CP_TOL)
    lo, hi = pts[j - 1], pts[j]
    witness = brentq(lambda t: float(profile.accumulated(t)) + CP_TOL, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)
    return CPCheck(False, vals[k], pts[k], float(witness))


def _parse_kv(body: str, spec: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for item in body.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise ValueError(f"malformed profile spec {spec!r}: expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise ValueError(f"malformed profile spec {spec!r}: {v!r} is not a number") from None
    return out


_FIELDS = {
    "jc": (JaynesCummings, {"lambda": "lam", "gamma0": "gamma0"}),
    "const": (Constant, {"gamma0": "gamma0"}),
    "cos": (DampedCosine, {"zeta": "zeta", "omega": "omega"}),
}


def parse_profile(spec: str, check_cp: bool = True) -> DecayProfile:
    """Build a profile from ``family:key=value,...`` or ``table:<path>``.

    ``check_cp=False`` admits damped-cosine rates whose accumulated rate dips
    below zero.
    """
    if ":" not in spec:
        raise ValueError(f"malformed profile spec {spec!r}: missing 'family:'")
    family, body = spec.split(":", 1)
    family = family.strip()
    if family == "table":
        return Tabulated.from_file(body.strip())
    if family not in _FIELDS:
        raise ValueError(f"unknown profile family {family!r} (jc, const, cos, table)")
    cls, names = _FIELDS[family]
    kv = _parse_kv(body, spec)
    unknown = set(kv) - set(names)
    missing = set(names) - set(kv)
    if unknown or missing:
        raise ValueError(
            f"profile {family!r} takes {sorted(names)}; "
            f"missing {sorted(missing)}, unknown {sorted(unknown)}"
        )
    kwargs = {names[k]: v for k, v in kv.items()}
    if cls is DampedCosine:
        kwargs["check_cp"] = check_cp
    return cls(**kwargs)
