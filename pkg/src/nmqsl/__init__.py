"""Quantum speed limits for a qubit relaxing in a Markovian or non-Markovian thermal bath.

The dissipator is generalized amplitude damping with a single time-dependent
rate gamma(t).  Because the Bloch dynamics depend on gamma only through its
integral, every hit time reduces to a first passage of the accumulated rate.
"""

from .analysis import (
    QslReport,
    RegimeReport,
    appendix_formulas,
    loglog_slope,
    regime_report,
    speedup,
    t_free,
)
from .classification import Classification, DynamicsClass, classify
from .control import (
    ControlSchedule,
    Segment,
    StrategyResult,
    execute_schedule,
    pulse_width_bound,
    replay_hit_time,
    schedule_from_events,
    schedule_to_events,
    strategy_classB_flip,
    strategy_cool,
    strategy_free,
    strategy_heat,
)
from .errors import DomainError, IntegrationError, RegimeError
from .geometry import (
    BathSpec,
    BlochVector,
    Rotation,
    extremal_angles,
    fixed_point,
    purity,
    purity_speed,
    rotate_to_angle,
    trace_distance,
)
from .profiles import (
    Constant,
    DampedCosine,
    DecayProfile,
    JaynesCummings,
    Tabulated,
    accumulated_rate,
    cp_check,
    divergence_time,
    gamma_at,
    parse_profile,
)
from .propagator import (
    Trajectory,
    free_trajectory,
    hit_time,
    integrate_oracle,
    propagate_closed,
    propagate_lambda,
)

__version__ = "0.1.0"

__all__ = [
    "BathSpec",
    "BlochVector",
    "Classification",
    "Constant",
    "ControlSchedule",
    "DampedCosine",
    "DecayProfile",
    "DomainError",
    "DynamicsClass",
    "IntegrationError",
    "JaynesCummings",
    "QslReport",
    "RegimeError",
    "RegimeReport",
    "Rotation",
    "Segment",
    "StrategyResult",
    "Tabulated",
    "Trajectory",
    "accumulated_rate",
    "appendix_formulas",
    "classify",
    "cp_check",
    "divergence_time",
    "execute_schedule",
    "extremal_angles",
    "fixed_point",
    "free_trajectory",
    "gamma_at",
    "hit_time",
    "integrate_oracle",
    "loglog_slope",
    "parse_profile",
    "propagate_closed",
    "propagate_lambda",
    "pulse_width_bound",
    "purity",
    "purity_speed",
    "regime_report",
    "replay_hit_time",
    "rotate_to_angle",
    "schedule_from_events",
    "schedule_to_events",
    "speedup",
    "strategy_classB_flip",
    "strategy_cool",
    "strategy_free",
    "strategy_heat",
    "t_free",
    "trace_distance",
]
