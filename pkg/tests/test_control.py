import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import accumulated, gamma_jc
from nmqsl.control import (
    ControlSchedule,
    Segment,
    dump_schedule,
    execute_schedule,
    heat_backflow_mitigation_angle,
    pulse_width_bound,
    replay_hit_time,
    schedule_from_events,
    schedule_to_events,
    strategy_classB_flip,
    strategy_cool,
    strategy_free,
    strategy_heat,
)
from nmqsl.errors import RegimeError
from nmqsl.geometry import BathSpec, BlochVector, Rotation, trace_distance
from nmqsl.profiles import Constant, DampedCosine, JaynesCummings
from nmqsl.propagator import hit_time
from scipy.optimize import brentq

BATH = BathSpec(2.0)
S0 = BlochVector(0.3, 0.0, 0.4)
HOT = BlochVector(0.0, 0.0, 0.9)
K = BATH.gamma_sum
RFP = BATH.rfp_magnitude


def test_cool_const():
    res = strategy_cool(S0, Constant(1.0), BATH, 0.01)
    assert res.t_qsl == pytest.approx(math.log((RFP - 0.5) / 0.01) / K, rel=1e-12)
    assert res.t_qsl == pytest.approx(0.389103, abs=1e-6)
    assert trace_distance(res.final_state, BATH.fixed_point) == pytest.approx(0.01, abs=1e-12)
    assert res.tag == "EXACT" and not res.schedule.requires_intermediate


def test_cool_cos0():
    res = strategy_cool(S0, DampedCosine(1.0, 0.0), BATH, 0.01)
    assert res.t_qsl == pytest.approx(-math.log(1 - math.log((RFP - 0.5) / 0.01) / K), rel=1e-12)
    assert res.t_qsl == pytest.approx(0.492827, abs=1e-6)


def test_cool_jc_nm_matches_quadrature_inversion():
    need = math.log((RFP - 0.5) / 0.01) / K
    ref = brentq(lambda t: accumulated(lambda s: gamma_jc(0.01, 100.0, s), t) - need, 0.1, 2.0, xtol=1e-13)
    res = strategy_cool(S0, JaynesCummings(0.01, 100.0), BATH, 0.01)
    assert res.t_qsl == pytest.approx(ref, abs=1e-9)
    assert res.t_qsl == pytest.approx(0.855101, abs=1e-6)


def test_heat_examples():
    res = strategy_heat(HOT, Constant(1.0), BATH, 0.01)
    assert res.t_qsl == pytest.approx(math.log(1.661594 / 1.533188) / K, abs=1e-7)
    assert res.t_qsl == pytest.approx(0.0095873, abs=1e-6)
    assert trace_distance(res.final_state, BATH.fixed_point) == pytest.approx(0.01, abs=1e-12)
    nm = strategy_heat(HOT, JaynesCummings(0.01, 100.0), BATH, 0.01)
    assert nm.t_qsl == pytest.approx(0.1383934, abs=1e-6)


def test_heat_stays_finite_as_eps_vanishes():
    limit = math.log((0.9 + RFP) / (2 * RFP)) / K
    res = strategy_heat(HOT, Constant(1.0), BATH, 1e-12)
    assert res.t_qsl == pytest.approx(limit, rel=1e-9)


def test_wrong_regime():
    with pytest.raises(RegimeError):
        strategy_cool(HOT, Constant(1.0), BATH, 0.01)
    with pytest.raises(RegimeError):
        strategy_heat(S0, Constant(1.0), BATH, 0.01)
    with pytest.raises(ValueError):
        strategy_cool(S0, Constant(1.0), BATH, 0.0)


def test_unreachable_reports_none():
    res = strategy_cool(S0, DampedCosine(1.0, 2.0), BATH, 1e-6)
    assert res.t_qsl is None and not res.reachable
    assert strategy_free(S0, DampedCosine(1.0, 1.0), BATH, 0.01).t_qsl is None


def test_free_matches_hit_time():
    res = strategy_free(S0, Constant(1.0), BATH, 0.01)
    assert res.t_qsl == hit_time(S0, Constant(1.0), BATH, 0.01)
    assert res.schedule.initial_rotation.is_identity


def test_already_inside_band():
    s = BlochVector(0.0, 0.0, RFP - 0.005)
    res = strategy_cool(s, Constant(1.0), BATH, 0.01)
    assert res.t_qsl == 0.0
    assert trace_distance(res.final_state, BATH.fixed_point) <= 0.01


def test_flip_degenerates_to_cool_without_sign_change():
    a = strategy_classB_flip(S0, DampedCosine(1.0, 0.0), BATH, 0.01)
    b = strategy_cool(S0, DampedCosine(1.0, 0.0), BATH, 0.01)
    assert a.t_qsl == b.t_qsl and not a.bound_only
    # small omega: the target is met before the first zero of gamma
    c = strategy_classB_flip(S0, DampedCosine(1.0, 0.3), BATH, 0.01)
    d = strategy_cool(S0, DampedCosine(1.0, 0.3), BATH, 0.01)
    assert c.t_qsl == pytest.approx(d.t_qsl, rel=1e-14) and not c.bound_only


def test_flip_beats_plain_cooling_class_b():
    p = DampedCosine(1.0, 4.0, check_cp=False)
    res = strategy_classB_flip(S0, p, BATH, 0.01)
    plain = strategy_cool(S0, p, BATH, 0.01)
    assert res.bound_only and res.tag == "LOWER_BOUND"
    assert res.schedule.requires_intermediate
    assert res.t_qsl == pytest.approx(0.436918, abs=1e-6)
    assert plain.t_qsl is None or res.t_qsl < plain.t_qsl
    p_traj = res.trajectory.purities
    assert np.min(np.diff(p_traj)) >= -1e-10
    assert trace_distance(res.final_state, BATH.fixed_point) == pytest.approx(0.01, abs=1e-10)
    # each flip sits at a zero of gamma
    for t, rot in res.schedule.intermediate_rotations:
        assert abs(p.gamma(t)) < 1e-12
        assert rot.angle == pytest.approx(math.pi)


def test_flip_needs_damped_cosine():
    with pytest.raises(TypeError):
        strategy_classB_flip(S0, Constant(1.0), BATH, 0.01)


@given(st.floats(0.0, 0.99), st.floats(0.0, math.pi), st.floats(0.1, 3.0), st.floats(0.5, 5.0))
def test_control_never_hurts(r, theta, g0, beta):
    bath = BathSpec(beta)
    s = BlochVector.from_polar(r, theta)
    eps = 0.01
    rfp = bath.rfp_magnitude
    p = Constant(g0)
    if r < rfp - eps:
        res = strategy_cool(s, p, bath, eps)
    elif r > rfp + eps:
        res = strategy_heat(s, p, bath, eps)
    else:
        return
    tf = hit_time(s, p, bath, eps)
    assert res.t_qsl <= tf * (1 + 1e-12) + 1e-15


@given(st.floats(0.0, 0.7), st.floats(0.0, math.pi))
def test_replay_reproduces_t_qsl(r, theta):
    s = BlochVector.from_polar(r, theta)
    p = JaynesCummings(0.5, 2.0)
    res = strategy_cool(s, p, BATH, 0.01)
    assert replay_hit_time(res.schedule, s, p, BATH, 0.01) == pytest.approx(res.t_qsl, abs=1e-10)


def test_replay_of_flip_schedule():
    p = DampedCosine(1.0, 4.0, check_cp=False)
    res = strategy_classB_flip(S0, p, BATH, 0.01)
    assert replay_hit_time(res.schedule, S0, p, BATH, 0.01) == pytest.approx(res.t_qsl, abs=1e-10)


def test_schedule_json_round_trip():
    p = DampedCosine(1.0, 4.0, check_cp=False)
    sched = strategy_classB_flip(S0, p, BATH, 0.01).schedule
    events = json.loads(dump_schedule(sched))
    back = schedule_from_events(events)
    assert schedule_to_events(back) == schedule_to_events(sched)
    a, _ = execute_schedule(sched, S0, p, BATH)
    b, _ = execute_schedule(back, S0, p, BATH)
    assert np.allclose(a.as_array(), b.as_array(), atol=1e-15)


@pytest.mark.parametrize(
    "events",
    [
        [],
        [{"t": 0.0, "type": "segment_end"}],
        [{"t": 1.0, "type": "pulse", "axis": [0, 0, 1], "angle": 0.0},
         {"t": 1.0, "type": "pulse", "axis": [0, 0, 1], "angle": 0.0}],
        [{"t": 0.0, "type": "pulse", "axis": [0, 0, 1], "angle": 0.0},
         {"t": 1.0, "type": "boom"},
         {"t": 1.0, "type": "pulse", "axis": [0, 0, 1], "angle": 0.0}],
    ],
)
def test_bad_schedules_rejected(events):
    with pytest.raises(ValueError):
        schedule_from_events(events)


def test_schedule_validation():
    with pytest.raises(ValueError):
        ControlSchedule(Rotation.identity(), (Segment(0.0, 1.0), Segment(0.5, 2.0)), (), Rotation.identity())


def test_pulse_width_bounds():
    assert pulse_width_bound(Constant(1.0), BATH).scale == pytest.approx(1 / K)
    assert pulse_width_bound(Constant(1.0), BATH).admissible == pytest.approx(0.00119203, abs=1e-8)
    assert pulse_width_bound(JaynesCummings(0.01, 100.0), BATH).scale == pytest.approx(1 / math.sqrt(K), rel=1e-12)
    assert pulse_width_bound(JaynesCummings(0.01, 100.0), BATH).admissible == pytest.approx(0.00345258, abs=1e-8)
    assert pulse_width_bound(DampedCosine(1.0, 2.0), BATH).scale == pytest.approx(0.1192029, abs=1e-7)


def test_heat_mitigation_angle():
    assert heat_backflow_mitigation_angle(1.0, BATH) == pytest.approx(math.acos(-RFP))
    assert heat_backflow_mitigation_angle(0.5, BATH) == math.pi
