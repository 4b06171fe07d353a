"""Markovian / Class A / Class B classification of a rate profile for a given state.

Markovian dynamics keep gamma >= 0 throughout.  Otherwise the first time
gamma turns negative is compared with the free-evolution time T_F at which
the state enters the eps-ball around the fixed point: if the ball is reached
first the dynamics is Class A, if the rate turns negative first it is Class B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import BathSpec, BlochVector
from .profiles import DecayProfile, JaynesCummings, Tabulated, ZERO_RTOL
from .propagator import hit_time

__all__ = ["DynamicsClass", "Classification", "classify", "first_negative_time"]


class DynamicsClass(str, Enum):
    MARKOV = "MARKOV"
    CLASS_A = "CLASS_A"
    CLASS_B = "CLASS_B"


@dataclass(frozen=True)
class Classification:
    markovian: bool
    dynamics_class: DynamicsClass
    t_first_sign_change: float | None
    t_fixed_point: float | None
    divergence_like: bool = False

    def as_dict(self) -> dict:
        return {
            "markovian": self.markovian,
            "class": self.dynamics_class.value,
            "t_first_sign_change": self.t_first_sign_change,
            "t_fixed_point": self.t_fixed_point,
        }


def first_negative_time(profile: DecayProfile, horizon: float) -> float | None:
    """First time in [0, horizon] after which gamma is negative, or None."""
    if isinstance(profile, Tabulated):
        rates = profile.rates
        scale = float(np.max(np.abs(rates)))
        if scale == 0.0:
            return None
        nonzero = np.abs(rates) > ZERO_RTOL * scale
        first = int(np.argmax(nonzero))
        if rates[first] < 0.0:
            return float(profile.times[first]) if first else 0.0
    changes = profile.sign_changes(horizon)
    return changes[0] if changes else None


def classify(
    profile: DecayProfile,
    bath: BathSpec,
    initial: BlochVector,
    eps: float,
    horizon: float | None = None,
) -> Classification:
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if horizon is None:
        horizon = profile.default_horizon()
        # a rate that diverges has its sign change at the pole
        if math.isfinite(profile.domain_end):
            horizon = max(horizon, profile.domain_end)
    t_neg = first_negative_time(profile, horizon)
    t_fp = hit_time(initial, profile, bath, eps)
    if isinstance(profile, JaynesCummings) and profile.branch == "NM":
        t_div = profile.divergence_time()
        t_fp = t_div if t_fp is None else min(t_fp, t_div)
    divergence_like = isinstance(profile, Tabulated) and profile.divergence_like
    if t_neg is None:
        return Classification(True, DynamicsClass.MARKOV, None, t_fp, divergence_like)
    if t_fp is not None and t_neg >= t_fp:
        cls = DynamicsClass.CLASS_A
    else:
        cls = DynamicsClass.CLASS_B
    return Classification(False, cls, t_neg, t_fp, divergence_like)
