"""Propagation of rho' = gamma(t) L(rho) for the generalized amplitude-damping generator.

Two independent routes are provided:

* :func:`propagate_closed` - exact Bloch-coordinate solution.  The profile
  enters only through the accumulated rate difference dLam = Lam(t1) - Lam(t0):
  the transverse components shrink by exp(-k dLam / 2) and the longitudinal
  offset from the fixed point by exp(-k dLam), with k = 1 + e^beta.
* :func:`integrate_oracle` - adaptive Dormand-Prince integration of the full
  2x2 density-matrix equation, built from the raising/lowering operators.
  It shares no formulas with the closed form and is used to cross-check it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence, TextIO

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, IntegrationError
from .geometry import BathSpec, BlochVector, trace_distance
from .profiles import DecayProfile, Tabulated, analysis_end

__all__ = [
    "GeneratorGAD",
    "Trajectory",
    "density_matrix",
    "bloch_vector",
    "propagate_lambda",
    "propagate_closed",
    "integrate_oracle",
    "DormandPrince",
    "lambda_to_ball",
    "lambda_to_level",
    "first_passage",
    "hit_time",
    "free_trajectory",
    "TRAJECTORY_COLUMNS",
]

# index 0 is the excited state (sigma_z = +1)
_SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_SIGMA_MINUS = _SIGMA_PLUS.T.copy()
_PAULI = (
    np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    np.array([[0.0, -1j], [1j, 0.0]], dtype=complex),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
)


def density_matrix(state: BlochVector) -> np.ndarray:
    x, y, z = state.rx, state.ry, state.rz
    return 0.5 * np.array([[1.0 + z, x - 1j * y], [x + 1j * y, 1.0 - z]], dtype=complex)


def bloch_vector(rho: np.ndarray) -> BlochVector:
    return BlochVector(*(float(np.real(np.trace(rho @ s))) for s in _PAULI))


def _dissipator(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    opd = op.conj().T
    n = opd @ op
    return op @ rho @ opd - 0.5 * (n @ rho + rho @ n)


@dataclass(frozen=True)
class GeneratorGAD:
    """L = L1 + e^beta L2 with L1 pumping via sigma_+ and L2 damping via sigma_-."""

    bath: BathSpec

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return _dissipator(_SIGMA_PLUS, rho) + math.exp(self.bath.beta) * _dissipator(
            _SIGMA_MINUS, rho
        )

    def superoperator(self) -> np.ndarray:
        """4x4 matrix S with vec(L(rho)) = S vec(rho), row-major vec."""
        cols = []
        for k in range(4):
            e = np.zeros(4, dtype=complex)
            e[k] = 1.0
            cols.append(self(e.reshape(2, 2)).reshape(4))
        return np.column_stack(cols)


# ---------------------------------------------------------------- closed form


def propagate_lambda(state: BlochVector, delta_lambda: float, bath: BathSpec) -> BlochVector:
    """Advance ``state`` by an accumulated-rate increment (may be negative or inf)."""
    k = bath.gamma_sum
    zfp = bath.fixed_point.rz
    if delta_lambda == math.inf:
        return bath.fixed_point
    shrink_z = math.exp(-k * delta_lambda)
    shrink_xy = math.exp(-0.5 * k * delta_lambda)
    return BlochVector(
        state.rx * shrink_xy, state.ry * shrink_xy, zfp + (state.rz - zfp) * shrink_z
    )


def propagate_closed(
    state: BlochVector, profile: DecayProfile, bath: BathSpec, t0: float, t1: float
) -> BlochVector:
    if t1 < t0:
        raise ValueError(f"t1 = {t1} precedes t0 = {t0}")
    dlam = float(profile.accumulated(t1)) - float(profile.accumulated(t0))
    return propagate_lambda(state, dlam, bath)


# ------------------------------------------------------------------- oracle


class DormandPrince:
    """Dormand-Prince 5(4) with a PI step-size controller.

    ``solve`` returns the state at ``t1``; when ``t_eval`` is supplied the
    accepted steps are also interpolated there with cubic Hermite dense
    output (values and derivatives at both step ends).
    """

    C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
    A = [
        np.array([]),
        np.array([1 / 5]),
        np.array([3 / 40, 9 / 40]),
        np.array([44 / 45, -56 / 15, 32 / 9]),
        np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
        np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
        np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
    ]
    B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
    E = np.array(
        [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
    )
    ORDER = 5

    def __init__(
        self,
        rtol: float = 1e-10,
        atol: float = 1e-12,
        safety: float = 0.9,
        alpha: float = 0.7 / 5,
        beta: float = 0.4 / 5,
        max_steps: int = 1_000_000,
    ):
        self.rtol = rtol
        self.atol = atol
        self.safety = safety
        self.alpha = alpha
        self.beta = beta
        self.max_steps = max_steps
        self.n_accepted = 0
        self.n_rejected = 0

    def _initial_step(self, f, t0, y0, f0, t1) -> float:
        scale = self.atol + self.rtol * np.abs(y0)
        d0 = np.linalg.norm(y0 / scale) / math.sqrt(y0.size)
        d1 = np.linalg.norm(f0 / scale) / math.sqrt(y0.size)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, abs(t1 - t0))
        f1 = f(t0 + h0, y0 + h0 * f0)
        d2 = np.linalg.norm((f1 - f0) / scale) / math.sqrt(y0.size) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1.0 / self.ORDER)
        return min(100 * h0, h1, abs(t1 - t0))

    def solve(
        self,
        f: Callable[[float, np.ndarray], np.ndarray],
        t0: float,
        y0: np.ndarray,
        t1: float,
        t_eval: Sequence[float] | None = None,
    ) -> tuple[np.ndarray, np.ndarray | None]:
        y = np.array(y0, dtype=complex)
        t = float(t0)
        if t1 == t0:
            return y, (np.array([y for _ in t_eval]) if t_eval is not None else None)
        evals = None if t_eval is None else np.asarray(t_eval, dtype=float)
        dense: list[np.ndarray] = []
        ei = 0
        fy = f(t, y)
        h = self._initial_step(f, t, y, fy, t1)
        err_prev = 1e-4
        rejected = False
        k = np.empty((7, y.size), dtype=complex)
        for _ in range(self.max_steps):
            if t >= t1:
                break
            hmin = 16 * np.finfo(float).eps * max(1.0, abs(t))
            if h < hmin and t1 - t > hmin:
                raise IntegrationError(
                    f"step size underflow at t = {t:.12g} (h = {h:.3g}); the rate is "
                    f"likely diverging - use the closed-form propagator there"
                )
            h = min(h, t1 - t)
            k[0] = fy
            for s in range(1, 7):
                k[s] = f(t + self.C[s] * h, y + h * (self.A[s] @ k[:s]))
            y_new = y + h * (self.B @ k)
            err_vec = h * (self.E @ k)
            scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.max(np.abs(err_vec) / scale))
            if not math.isfinite(err):
                err = math.inf
            if err <= 1.0:
                f_new = k[6].copy()  # FSAL
                t_new = t + h
                if evals is not None:
                    while ei < evals.size and evals[ei] <= t_new:
                        dense.append(_hermite(t, y, fy, t_new, y_new, f_new, evals[ei]))
                        ei += 1
                t, y, fy = t_new, y_new, f_new
                self.n_accepted += 1
                err = max(err, 1e-10)
                fac = self.safety * err ** (-self.alpha) * err_prev**self.beta
                fac = min(5.0, max(0.2, fac))
                if rejected:
                    fac = min(1.0, fac)
                h *= fac
                err_prev = err
                rejected = False
            else:
                self.n_rejected += 1
                fac = 0.2 if err == math.inf else max(0.2, self.safety * err ** (-1.0 / self.ORDER))
                h *= fac
                rejected = True
        else:
            raise IntegrationError(f"exceeded {self.max_steps} steps before t1 = {t1}")
        if evals is not None:
            while ei < evals.size:
                dense.append(y.copy())
                ei += 1
            return y, np.array(dense)
        return y, None


def _hermite(t0, y0, f0, t1, y1, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def integrate_oracle(
    state: BlochVector,
    profile: DecayProfile,
    bath: BathSpec,
    t0: float,
    t1: float,
    tol: float = 1e-10,
    t_eval: Sequence[float] | None = None,
) -> BlochVector | tuple[BlochVector, list[BlochVector]]:
    """Integrate the density-matrix equation numerically from t0 to t1.

    Local error is controlled at ``tol`` (relative) and ``tol / 100``
    (absolute).  With ``t_eval`` the dense-output states at those times are
    returned as well.
    """
    if not 1e-12 <= tol <= 1e-4:
        raise ValueError(f"tol must lie in [1e-12, 1e-4], got {tol}")
    if t1 < t0:
        raise ValueError(f"t1 = {t1} precedes t0 = {t0}")
    S = GeneratorGAD(bath).superoperator()
    if isinstance(profile, Tabulated):
        # integrate each linear piece separately so the kinks fall on step boundaries
        knots = [t for t in profile.times if t0 < t < t1]
    else:
        knots = []

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return float(profile.gamma(t)) * (S @ y)

    solver = DormandPrince(rtol=tol, atol=tol * 1e-2)
    y = density_matrix(state).reshape(4)
    edges = [t0, *knots, t1]
    samples: list[np.ndarray] = []
    evals = None if t_eval is None else np.asarray(t_eval, dtype=float)
    for a, b in zip(edges[:-1], edges[1:]):
        sub = None
        if evals is not None:
            sub = evals[(evals > a) & (evals <= b)] if a > edges[0] else evals[(evals >= a) & (evals <= b)]
        y, dense = solver.solve(rhs, a, y, b, sub)
        if dense is not None:
            samples.extend(dense)
    final = bloch_vector(y.reshape(2, 2))
    if t_eval is None:
        return final
    return final, [bloch_vector(s.reshape(2, 2)) for s in samples]


# ------------------------------------------------------------- hit times


def lambda_to_ball(state: BlochVector, bath: BathSpec, eps: float) -> float:
    """Accumulated rate needed for free evolution to bring ``state`` within ``eps`` of the fixed point.

    Solves a u^2 + b u = eps^2 for u = exp(-k dLam), with a the squared
    longitudinal offset and b the squared transverse radius.
    """
    if not eps > 0.0:
        raise ValueError("eps must be > 0")
    zoff = state.rz - bath.fixed_point.rz
    a = zoff * zoff
    b = state.rx**2 + state.ry**2
    if a + b <= eps * eps:
        return 0.0
    u = 2.0 * eps * eps / (b + math.sqrt(b * b + 4.0 * a * eps * eps))
    return -math.log(u) / bath.gamma_sum


def lambda_to_level(state: BlochVector, bath: BathSpec, level: float) -> float | None:
    """Accumulated-rate increment at which rz reaches ``level``.

    Negative when the level lies beyond ``state`` away from the fixed point;
    None when it lies on the far side of the fixed point (never crossed).
    """
    zfp = bath.fixed_point.rz
    num = state.rz - zfp
    den = level - zfp
    if num == 0.0:
        return 0.0 if den == 0.0 else None
    ratio = num / den if den != 0.0 else math.inf
    if ratio <= 0.0:
        return None
    if ratio == math.inf:
        return math.inf
    return math.log(ratio) / bath.gamma_sum


def _search_end(profile: DecayProfile, target: float, t0: float, horizon: float | None) -> float | None:
    if horizon is not None:
        return analysis_end(profile, horizon)
    if math.isfinite(profile.domain_end):
        return analysis_end(profile, profile.domain_end)
    if isinstance(profile, Tabulated):
        return profile.t_end
    if profile.accumulated_sup() < target:
        return None
    end = max(t0, 0.0) + profile.default_horizon()
    for _ in range(200):
        if profile.accumulated(end) >= target:
            return end
        end *= 2.0
    return None


def _narrow(profile: DecayProfile, target: float, direction: int, a: float, b: float) -> tuple[float, float]:
    """Shrink a very wide bracket [a, b] by doubling from the left end.

    On a long plateau of Lam Brent's method degenerates to bisection, which
    cannot cover hundreds of decades in a bounded number of steps.
    """
    if b - a <= 1e3 * max(1.0, a):
        return a, b
    lo = max(a, 1.0)
    if direction * (float(profile.accumulated(lo)) - target) >= 0.0:
        return a, lo
    while 2.0 * lo < b:
        if direction * (float(profile.accumulated(2.0 * lo)) - target) >= 0.0:
            return lo, 2.0 * lo
        lo *= 2.0
    return lo, b


def first_passage(
    profile: DecayProfile,
    target: float,
    t0: float = 0.0,
    horizon: float | None = None,
    direction: int = 1,
) -> float | None:
    """Earliest t >= t0 at which the accumulated rate reaches ``target``.

    ``direction=+1`` looks for Lam(t) >= target, ``-1`` for Lam(t) <= target.
    The accumulated rate is monotone between sign changes of gamma, so each
    such piece is bracketed and then refined with Brent's method.
    """
    start = float(profile.accumulated(t0))
    if direction * (start - target) >= 0.0:
        return t0
    if direction > 0 and target == math.inf:
        end = profile.domain_end
        return end if math.isfinite(end) else None
    end = _search_end(profile, target if direction > 0 else -math.inf, t0, horizon)
    if end is None or end <= t0:
        return None
    breaks = [t for t in profile.sign_changes(end) if t0 < t < end] + [end]
    a = t0
    for b in breaks:
        lam_b = float(profile.accumulated(b))
        if direction * (lam_b - target) >= 0.0:
            a, b = _narrow(profile, target, direction, a, b)
            # relative accuracy only: brackets can span many orders of magnitude
            return float(
                brentq(
                    lambda t: float(profile.accumulated(t)) - target,
                    a,
                    b,
                    xtol=1e-300,
                    rtol=4 * np.finfo(float).eps,
                    maxiter=500,
                )
            )
        a = b
    return None


def hit_time(
    state: BlochVector,
    profile: DecayProfile,
    bath: BathSpec,
    eps: float,
    mode: str = "distance_ball",
    level: float | None = None,
    horizon: float | None = None,
) -> float | None:
    """Earliest free-evolution time at which the target is met, or None.

    ``mode="distance_ball"`` targets d(t) <= eps; ``mode="rz_level"`` targets
    rz crossing ``level``.  Unreachable targets return None.
    """
    if not eps > 0.0:
        raise ValueError("eps must be > 0")
    if mode == "distance_ball":
        need = lambda_to_ball(state, bath, eps)
    elif mode == "rz_level":
        if level is None:
            raise ValueError("rz_level mode needs a level")
        need = lambda_to_level(state, bath, level)
        if need is None:
            return None
    else:
        raise ValueError(f"unknown hit mode {mode!r}")
    if need == 0.0:
        return 0.0
    return first_passage(profile, need, 0.0, horizon, 1 if need > 0 else -1)


# ------------------------------------------------------------- trajectories

TRAJECTORY_COLUMNS = ("t", "rx", "ry", "rz", "d", "P", "gamma", "Lambda")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n, 3)
    distances: np.ndarray
    purities: np.ndarray
    gammas: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self) -> None:
        if self.times.ndim != 1 or self.states.shape != (self.times.size, 3):
            raise ValueError("trajectory arrays have inconsistent shapes")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("trajectory times must be strictly increasing")

    @classmethod
    def from_states(
        cls,
        times: Sequence[float],
        states: Sequence[BlochVector],
        profile: DecayProfile,
        bath: BathSpec,
    ) -> "Trajectory":
        t = np.asarray(times, dtype=float)
        arr = np.array([s.as_array() for s in states], dtype=float).reshape(-1, 3)
        fp = bath.fixed_point
        d = np.array([trace_distance(s, fp) for s in states])
        p = 0.5 * (1.0 + np.sum(arr * arr, axis=1))
        return cls(t, arr, d, p, np.asarray(profile.gamma(t)), np.asarray(profile.accumulated(t)))

    def __len__(self) -> int:
        return self.times.size

    def state(self, i: int) -> BlochVector:
        return BlochVector.from_array(self.states[i])

    @property
    def final_state(self) -> BlochVector:
        return self.state(-1)

    def rows(self):
        for i in range(self.times.size):
            yield (
                self.times[i],
                *self.states[i],
                self.distances[i],
                self.purities[i],
                self.gammas[i],
                self.lambdas[i],
            )

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for row in self.rows():
            w.writerow([fmt(v) for v in row])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def fmt(x: float | None) -> str:
    """Locale-independent 9-significant-digit formatting; None becomes empty."""
    if x is None:
        return ""
    x = float(x)
    if x == 0.0:
        return "0"
    return format(x, ".9g")


def free_trajectory(
    state: BlochVector, profile: DecayProfile, bath: BathSpec, times: Sequence[float]
) -> Trajectory:
    times = np.asarray(times, dtype=float)
    if times.size and times[0] < 0.0:
        raise DomainError("sample times must be >= 0")
    lam0 = float(profile.accumulated(0.0))
    lams = np.asarray(profile.accumulated(times), dtype=float)
    states = [propagate_lambda(state, float(l) - lam0, bath) for l in lams]
    return Trajectory.from_states(times, states, profile, bath)
