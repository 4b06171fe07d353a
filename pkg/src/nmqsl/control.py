"""Impulsive-control schedules and the optimal relaxation strategies.

A schedule is an initial rotation, free-evolution segments separated by
optional instantaneous rotations, and a final rotation.  With only the
initial and final pulses the map is completely positive whenever the
accumulated rate is non-negative.  Schedules with pulses in between assume
the same rate keeps acting after each pulse; their times are therefore only
lower bounds and are tagged ``LOWER_BOUND``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import RegimeError
from .geometry import BathSpec, BlochVector, Rotation, check_state, rotate_to_angle
from .profiles import DampedCosine, DecayProfile, JaynesCummings, Tabulated, Constant
from .propagator import (
    Trajectory,
    first_passage,
    hit_time,
    propagate_lambda,
)

__all__ = [
    "Segment",
    "ControlSchedule",
    "StrategyResult",
    "PulseWidthBound",
    "strategy_cool",
    "strategy_heat",
    "strategy_free",
    "strategy_classB_flip",
    "heat_backflow_mitigation_angle",
    "pulse_width_bound",
    "execute_schedule",
    "replay_hit_time",
    "schedule_to_events",
    "schedule_from_events",
    "LOWER_BOUND",
    "EXACT",
]

LOWER_BOUND = "LOWER_BOUND"
EXACT = "EXACT"

_FLIP = Rotation((0.0, 1.0, 0.0), math.pi)


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    theta: float | None = None  # polar angle held during the segment; None = free

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class ControlSchedule:
    initial_rotation: Rotation
    segments: tuple[Segment, ...]
    intermediate_rotations: tuple[tuple[float, Rotation], ...] = ()
    final_rotation: Rotation = field(default_factory=Rotation.identity)

    def __post_init__(self) -> None:
        prev = 0.0
        for seg in self.segments:
            if seg.start != prev or not seg.end > seg.start:
                raise ValueError(f"segments must tile [0, T] with positive durations: {seg}")
            prev = seg.end
        times = [t for t, _ in self.intermediate_rotations]
        if any(b <= a for a, b in zip(times[:-1], times[1:])):
            raise ValueError("intermediate pulse times must increase strictly")
        boundaries = {s.end for s in self.segments[:-1]}
        if any(t not in boundaries for t in times):
            raise ValueError("intermediate pulses must sit on segment boundaries")

    @property
    def duration(self) -> float:
        return self.segments[-1].end if self.segments else 0.0

    @property
    def requires_intermediate(self) -> bool:
        return bool(self.intermediate_rotations)

    @property
    def tag(self) -> str:
        return LOWER_BOUND if self.requires_intermediate else EXACT


@dataclass(frozen=True)
class StrategyResult:
    strategy: str
    schedule: ControlSchedule | None
    t_qsl: float | None
    trajectory: Trajectory | None
    bound_only: bool = False
    final_state: BlochVector | None = None

    @property
    def reachable(self) -> bool:
        return self.t_qsl is not None

    @property
    def tag(self) -> str:
        return LOWER_BOUND if self.bound_only else EXACT


# ------------------------------------------------------------ execution


def _pulse_map(schedule: ControlSchedule) -> dict[float, Rotation]:
    return dict(schedule.intermediate_rotations)


def _state_at(
    schedule: ControlSchedule,
    initial: BlochVector,
    profile: DecayProfile,
    bath: BathSpec,
    t: float,
) -> BlochVector:
    """State at time ``t`` (after any pulse scheduled exactly at ``t``)."""
    pulses = _pulse_map(schedule)
    state = schedule.initial_rotation.apply(initial)
    lam_prev = float(profile.accumulated(0.0))
    for seg in schedule.segments:
        stop = min(t, seg.end)
        lam = float(profile.accumulated(stop))
        state = propagate_lambda(state, lam - lam_prev, bath)
        lam_prev = lam
        if t < seg.end:
            return state
        if seg.end in pulses:
            state = pulses[seg.end].apply(state)
    return state


def execute_schedule(
    schedule: ControlSchedule,
    initial: BlochVector,
    profile: DecayProfile,
    bath: BathSpec,
    n_samples: int = 201,
) -> tuple[BlochVector, Trajectory]:
    """Run the schedule; return the final state (after the final pulse) and a sampled trajectory.

    Samples are taken on a uniform grid plus every pulse instant; states at a
    pulse instant are recorded after the pulse.  The final pulse is not
    part of the trajectory.
    """
    T = schedule.duration
    grid = set(np.linspace(0.0, T, max(n_samples, 2)).tolist()) if T > 0 else {0.0}
    grid.update(t for t, _ in schedule.intermediate_rotations)
    grid.update(seg.end for seg in schedule.segments)
    times = sorted(grid)
    states = []
    pulses = _pulse_map(schedule)
    state = schedule.initial_rotation.apply(initial)
    lam_prev = float(profile.accumulated(0.0))
    for t in times:
        lam = float(profile.accumulated(t))
        state = propagate_lambda(state, lam - lam_prev, bath)
        lam_prev = lam
        if t in pulses:
            state = pulses[t].apply(state)
        states.append(state)
    final = schedule.final_rotation.apply(state)
    return final, Trajectory.from_states(times, states, profile, bath)


def replay_hit_time(
    schedule: ControlSchedule,
    initial: BlochVector,
    profile: DecayProfile,
    bath: BathSpec,
    eps: float,
    samples_per_segment: int = 64,
) -> float | None:
    """First time the executed schedule reaches the purity band of the fixed point.

    Once ||r| - r_fp| <= eps a single rotation lands within eps of the fixed
    point, so this is the time a schedule actually needs.  Found by sampling
    each segment and refining the first crossing with Brent's method.
    """
    rfp = bath.rfp_magnitude
    band = eps + 1e-12

    # rotations preserve |r|, so pre- and post-pulse states give the same value
    def miss(t: float) -> float:
        return abs(_state_at(schedule, initial, profile, bath, t).r - rfp) - band

    if miss(0.0) <= 0.0:
        return 0.0
    for seg in schedule.segments:
        ts = np.linspace(seg.start, seg.end, samples_per_segment + 1)
        for lo, hi in zip(ts[:-1], ts[1:]):
            if miss(hi) <= 0.0:
                return float(
                    brentq(miss, lo, hi, xtol=1e-14 * max(1.0, hi), rtol=4 * np.finfo(float).eps)
                )
    return None


# --------------------------------------------------------- JSON events


def schedule_to_events(schedule: ControlSchedule) -> list[dict[str, Any]]:
    """Ordered pulse / segment_end events describing ``schedule``."""

    def pulse(t: float, rot: Rotation) -> dict[str, Any]:
        return {"t": t, "type": "pulse", "axis": list(rot.axis), "angle": rot.angle}

    events = [pulse(0.0, schedule.initial_rotation)]
    pulses = _pulse_map(schedule)
    for seg in schedule.segments:
        events.append({"t": seg.end, "type": "segment_end", "axis": None, "angle": None})
        if seg.end in pulses:
            events.append(pulse(seg.end, pulses[seg.end]))
    events.append(pulse(schedule.duration, schedule.final_rotation))
    return events


def schedule_from_events(events: Sequence[dict[str, Any]]) -> ControlSchedule:
    """Inverse of :func:`schedule_to_events`.

    The first event must be the pulse at t = 0 and the last the final pulse;
    every pulse in between must follow a ``segment_end`` at the same time.
    """
    events = list(events)
    if len(events) < 2 or events[0].get("type") != "pulse" or events[-1].get("type") != "pulse":
        raise ValueError("schedule must start and end with a pulse event")

    def rot(ev: dict[str, Any]) -> Rotation:
        return Rotation(tuple(float(c) for c in ev["axis"]), float(ev["angle"]))

    if float(events[0]["t"]) != 0.0:
        raise ValueError("initial pulse must be at t = 0")
    segments: list[Segment] = []
    inter: list[tuple[float, Rotation]] = []
    start = 0.0
    for ev in events[1:-1]:
        kind = ev.get("type")
        t = float(ev["t"])
        if kind == "segment_end":
            segments.append(Segment(start, t))
            start = t
        elif kind == "pulse":
            if not segments or segments[-1].end != t:
                raise ValueError(f"pulse at t = {t} does not follow a segment end")
            inter.append((t, rot(ev)))
        else:
            raise ValueError(f"unknown event type {kind!r}")
    if float(events[-1]["t"]) != start:
        raise ValueError("final pulse must coincide with the last segment end")
    return ControlSchedule(rot(events[0]), tuple(segments), tuple(inter), rot(events[-1]))


def dump_schedule(schedule: ControlSchedule) -> str:
    return json.dumps(schedule_to_events(schedule), indent=2)


# --------------------------------------------------------- strategies


def _regime_radius(initial: BlochVector, eps: float) -> float:
    check_state(initial)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    return initial.r


def _unreachable(name: str) -> StrategyResult:
    return StrategyResult(name, None, None, None)


def _finish(
    name: str,
    schedule: ControlSchedule,
    initial: BlochVector,
    profile: DecayProfile,
    bath: BathSpec,
    bound_only: bool = False,
) -> StrategyResult:
    final, traj = execute_schedule(schedule, initial, profile, bath)
    return StrategyResult(name, schedule, schedule.duration, traj, bound_only, final)


def _single_segment(
    rot_in: Rotation, t: float, theta: float | None, rot_fin: Rotation | None = None
) -> ControlSchedule:
    segs = (Segment(0.0, t, theta),) if t > 0.0 else ()
    return ControlSchedule(rot_in, segs, (), rot_fin or Rotation.identity())


def strategy_cool(
    initial: BlochVector,
    profile: DecayProfile,
    bath: BathSpec,
    eps: float,
    horizon: float | None = None,
) -> StrategyResult:
    """Rotate to the south pole (theta = pi) and let the bath raise the purity.

    The target is the level rz = -(r_fp - eps), reached when the offset from
    the fixed point has shrunk from r_fp - r to eps.
    """
    r = _regime_radius(initial, eps)
    rfp = bath.rfp_magnitude
    if r >= rfp:
        raise RegimeError(f"cooling needs |r| < r_fp = {rfp:.9g}, got {r:.9g}")
    _, rot_in = rotate_to_angle(initial, math.pi)
    if rfp - r <= eps:
        return _finish("cool", _single_segment(rot_in, 0.0, math.pi), initial, profile, bath)
    need = math.log((rfp - r) / eps) / bath.gamma_sum
    t = first_passage(profile, need, 0.0, horizon)
    if t is None:
        return _unreachable("cool")
    return _finish("cool", _single_segment(rot_in, t, math.pi), initial, profile, bath)


def strategy_heat(
    initial: BlochVector,
    profile: DecayProfile,
    bath: BathSpec,
    eps: float,
    horizon: float | None = None,
) -> StrategyResult:
    """Rotate to the north pole, relax down to rz = r_fp + eps, then flip to the south pole."""
    r = _regime_radius(initial, eps)
    rfp = bath.rfp_magnitude
    if r <= rfp:
        raise RegimeError(f"heating needs |r| > r_fp = {rfp:.9g}, got {r:.9g}")
    if r - rfp <= eps:
        _, rot_in = rotate_to_angle(initial, math.pi)
        return _finish("heat", _single_segment(rot_in, 0.0, math.pi), initial, profile, bath)
    _, rot_in = rotate_to_angle(initial, 0.0)
    need = math.log((r + rfp) / (2.0 * rfp + eps)) / bath.gamma_sum
    t = first_passage(profile, need, 0.0, horizon)
    if t is None:
        return _unreachable("heat")
    return _finish("heat", _single_segment(rot_in, t, 0.0, _FLIP), initial, profile, bath)


def strategy_free(
    initial: BlochVector,
    profile: DecayProfile,
    bath: BathSpec,
    eps: float,
    horizon: float | None = None,
) -> StrategyResult:
    """No control at all: wait for the state to enter the eps-ball."""
    _regime_radius(initial, eps)
    t = hit_time(initial, profile, bath, eps, horizon=horizon)
    if t is None:
        return _unreachable("free")
    return _finish("free", _single_segment(Rotation.identity(), t, None), initial, profile, bath)


def strategy_classB_flip(
    initial: BlochVector,
    profile: DampedCosine,
    bath: BathSpec,
    eps: float,
    horizon: float | None = None,
) -> StrategyResult:
    """Cooling that harvests negative-rate windows by flipping to the north pole.

    theta = pi is held while gamma > 0 and theta = 0 while gamma < 0, with
    pi-rotations at the zeros (2n+1) pi / (2 omega) of the rate.  The purity
    then grows in every window.  If the target is met before the first zero
    this is exactly :func:`strategy_cool`; otherwise the schedule needs
    intermediate pulses and the result is only a lower bound.
    """
    if not isinstance(profile, DampedCosine):
        raise TypeError("the flip strategy is defined for damped-cosine rates")
    r = _regime_radius(initial, eps)
    rfp = bath.rfp_magnitude
    if r >= rfp:
        raise RegimeError(f"cooling needs |r| < r_fp = {rfp:.9g}, got {r:.9g}")
    if not math.isfinite(0.5 * math.pi / profile.omega if profile.omega > 0.0 else math.inf):
        # gamma never changes sign at any representable time
        res = strategy_cool(initial, profile, bath, eps, horizon)
        return StrategyResult("flip", res.schedule, res.t_qsl, res.trajectory, False, res.final_state)
    _, rot_in = rotate_to_angle(initial, math.pi)
    if rfp - r <= eps:
        return _finish("flip", _single_segment(rot_in, 0.0, math.pi), initial, profile, bath)

    k = bath.gamma_sum
    zeta, omega = profile.zeta, profile.omega
    half = 0.5 * math.pi / omega
    segments: list[Segment] = []
    pulses: list[tuple[float, Rotation]] = []
    a = 0.0
    n = 0
    while True:
        b = (2 * n + 1) * half
        if horizon is not None and a >= horizon:
            return _unreachable("flip")
        # the remaining |integral| is below exp(-zeta a) / zeta: give up once negligible
        if math.exp(-zeta * a) / zeta * k < 1e-15:
            return _unreachable("flip")
        lam_a = float(profile.accumulated(a))
        south = n % 2 == 0
        if south:
            # gamma > 0: offset r_fp - r shrinks like exp(-k dLam)
            need = lam_a + math.log((rfp - r) / eps) / k
            direction = 1
        else:
            # gamma < 0 at the north pole: r + r_fp grows like exp(-k dLam)
            need = lam_a - math.log((2.0 * rfp - eps) / (r + rfp)) / k
            direction = -1
        lam_b = float(profile.accumulated(b))
        if direction * (lam_b - need) >= 0.0:
            t = first_passage(profile, need, a, b, direction)
            assert t is not None
            segments.append(Segment(a, t, math.pi if south else 0.0))
            rot_fin = Rotation.identity() if south else _FLIP
            sched = ControlSchedule(rot_in, tuple(segments), tuple(pulses), rot_fin)
            return _finish("flip", sched, initial, profile, bath, bound_only=bool(pulses))
        d_lam = lam_b - lam_a
        if south:
            r = rfp - (rfp - r) * math.exp(-k * d_lam)
        else:
            r = (r + rfp) * math.exp(-k * d_lam) - rfp
        segments.append(Segment(a, b, math.pi if south else 0.0))
        pulses.append((b, _FLIP))
        a = b
        n += 1


def heat_backflow_mitigation_angle(r: float, bath: BathSpec) -> float:
    """Polar angle minimizing the purity speed during a negative-rate window while heating."""
    rfp = bath.rfp_magnitude
    if r >= rfp and r > 0.0:
        return math.acos(max(-1.0, min(1.0, -rfp / r)))
    return math.pi


@dataclass(frozen=True)
class PulseWidthBound:
    scale: float  # time scale a pulse must be much shorter than
    admissible: float  # scale / MARGIN

    MARGIN = 100.0


def pulse_width_bound(profile: DecayProfile, bath: BathSpec) -> PulseWidthBound:
    k = bath.gamma_sum
    if isinstance(profile, Constant):
        scale = 1.0 / (profile.gamma0 * k)
    elif isinstance(profile, JaynesCummings):
        if profile.markovian:
            scale = 1.0 / (profile.gamma0 * k)
        else:
            scale = 1.0 / math.sqrt(profile.lam * profile.gamma0 * k)
    elif isinstance(profile, DampedCosine):
        cands = [1.0 / profile.zeta, 1.0 / k]
        if profile.omega > 0.0:
            cands.append(1.0 / profile.omega)
        scale = min(cands)
    elif isinstance(profile, Tabulated):
        peak = float(np.max(np.abs(profile.rates)))
        scale = math.inf if peak == 0.0 else 1.0 / (peak * k)
    else:
        raise TypeError(f"no pulse-width bound for {type(profile).__name__}")
    return PulseWidthBound(scale, scale / PulseWidthBound.MARGIN)
