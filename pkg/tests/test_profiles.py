import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import accumulated, gamma_cos, gamma_jc
from nmqsl.errors import DomainError
from nmqsl.profiles import (
    Constant,
    DampedCosine,
    JaynesCummings,
    Tabulated,
    cp_check,
    divergence_time,
    parse_profile,
)

rates = st.floats(1e-2, 1e2)


def test_gamma_examples():
    assert JaynesCummings(3.0, 0.4).gamma(0.0) == 0.0
    assert JaynesCummings(1.0, 0.25).gamma(2.0) == pytest.approx(gamma_jc(1.0, 0.25, 2.0), rel=1e-14)
    assert JaynesCummings(1.0, 0.25).gamma(2.0) == pytest.approx(0.2313355, abs=1e-7)
    assert JaynesCummings(1.0, 0.25).asymptotic_rate() == pytest.approx(0.292893, abs=1e-6)
    assert DampedCosine(1.0, 2.0).gamma(math.pi / 4) == pytest.approx(0.0, abs=1e-16)


def test_accumulated_examples():
    for p in (Constant(2.0), JaynesCummings(0.3, 2.0), DampedCosine(1.0, 2.0)):
        assert p.accumulated(0.0) == 0.0
    assert DampedCosine(1.0, 0.0).accumulated(1.0) == pytest.approx(1 - math.exp(-1), abs=1e-15)
    assert DampedCosine(1.0, 2.0).accumulated(60.0) == pytest.approx(0.2, abs=1e-15)
    assert DampedCosine(1.0, 2.0).accumulated_limit() == pytest.approx(0.2)


@given(rates, rates, st.floats(0.01, 0.99))
def test_jc_accumulated_matches_quadrature(lam, gamma0, frac):
    p = JaynesCummings(lam, gamma0)
    t = frac * (p.divergence_time() if not p.markovian else 10.0 / min(lam, gamma0))
    ref = accumulated(lambda s: gamma_jc(lam, gamma0, s), t)
    assert float(p.accumulated(t)) == pytest.approx(ref, rel=1e-8, abs=1e-10)
    assert float(p.gamma(t)) == pytest.approx(gamma_jc(lam, gamma0, t), rel=1e-10)


@given(st.floats(0.05, 5.0), st.floats(0.0, 10.0), st.floats(0.0, 20.0))
def test_cos_accumulated_matches_quadrature(zeta, omega, t):
    p = DampedCosine(zeta, omega, check_cp=False)
    ref = accumulated(lambda s: gamma_cos(zeta, omega, s), t)
    assert float(p.accumulated(t)) == pytest.approx(ref, abs=1e-10)


@given(rates, rates, st.floats(0.05, 0.95))
def test_derivative_of_accumulated_is_gamma(lam, gamma0, frac):
    p = JaynesCummings(lam, gamma0)
    t = frac * (p.divergence_time() if not p.markovian else 5.0 / min(lam, gamma0))
    h = 1e-6 * t
    fd = (float(p.accumulated(t + h)) - float(p.accumulated(t - h))) / (2 * h)
    assert fd == pytest.approx(float(p.gamma(t)), rel=1e-5, abs=1e-8)


def test_vectorized_evaluation_matches_scalar():
    p = JaynesCummings(0.5, 2.0)
    ts = np.linspace(0.0, 1.5, 7)
    assert np.allclose(p.accumulated(ts), [p.accumulated(t) for t in ts], rtol=0, atol=1e-15)
    assert isinstance(p.gamma(0.3), float)


def test_jc_branches():
    assert JaynesCummings(1.0, 0.25).branch == "M"
    assert JaynesCummings(1.0, 1.0).branch == "NM"
    assert JaynesCummings(2.0, 1.0).branch == "critical"
    assert JaynesCummings(1.0, 0.25).markovian
    assert not JaynesCummings(0.01, 100).markovian


@pytest.mark.parametrize("t", [0.1, 1.0, 5.0, 30.0])
def test_jc_continuity_across_branch_point(t):
    g0 = 1.0
    below = JaynesCummings(2 * g0 - 1e-8, g0)
    at = JaynesCummings(2 * g0, g0)
    above = JaynesCummings(2 * g0 + 1e-8, g0)
    crit = 2 * 2 * g0 * g0 * t / (2 + 2 * g0 * t)
    assert float(at.gamma(t)) == pytest.approx(crit, rel=1e-12)
    for p in (below, above):
        assert float(p.gamma(t)) == pytest.approx(crit, abs=1e-5)
        assert float(p.accumulated(t)) == pytest.approx(float(at.accumulated(t)), abs=1e-5)


def test_markovian_boundary_is_exactly_two_gamma0():
    g0 = 0.37
    assert JaynesCummings(2 * g0, g0).markovian
    assert JaynesCummings(math.nextafter(2 * g0, 10.0), g0).markovian
    assert not JaynesCummings(math.nextafter(2 * g0, 0.0), g0).markovian


def test_divergence_time_examples():
    assert divergence_time(JaynesCummings(0.01, 100.0)) == pytest.approx(2.2314973, abs=1e-7)
    assert divergence_time(JaynesCummings(1.0, 1.0)) == pytest.approx(2 * (math.pi - math.atan(1.0)), rel=1e-14)
    with pytest.raises(DomainError):
        divergence_time(JaynesCummings(1.0, 0.25))
    with pytest.raises(DomainError):
        divergence_time(Constant(1.0))


@given(rates, rates)
def test_divergence_time_is_a_pole(lam, gamma0):
    p = JaynesCummings(lam, gamma0)
    if p.markovian:
        return
    tf = p.divergence_time()
    gh = math.sqrt(2 * lam * gamma0 - lam * lam)
    # denominator of gamma vanishes
    assert gh * math.cos(gh * tf / 2) + lam * math.sin(gh * tf / 2) == pytest.approx(0.0, abs=1e-9 * (gh + lam))
    assert float(p.gamma(tf * (1 - 1e-9))) > 0.0


def test_evaluation_past_divergence_is_a_domain_error():
    p = JaynesCummings(0.01, 100.0)
    with pytest.raises(DomainError):
        p.gamma(3.0)
    with pytest.raises(DomainError):
        p.accumulated(np.array([0.0, 2.5]))
    with pytest.raises(DomainError):
        Constant(1.0).gamma(-1.0)


def test_divergence_asymptote():
    p = JaynesCummings(0.01, 100.0)
    asym = math.pi / math.sqrt(2 * p.lam * p.gamma0)
    assert asym == pytest.approx(2.221441, abs=1e-6)
    assert (p.divergence_time() - asym) / asym == pytest.approx(0.0045, abs=1e-4)
    q = JaynesCummings(0.01, 1e4)
    asym_q = math.pi / math.sqrt(2 * q.lam * q.gamma0)
    assert abs(q.divergence_time() - asym_q) / asym_q < 1e-3


def test_cp_examples():
    assert cp_check(Constant(1.0), 10.0).ok
    c = cp_check(DampedCosine(1.0, 2.0), 50.0)
    assert c.ok and c.min_value == 0.0 and c.argmin == 0.0
    neg = cp_check(Tabulated(np.array([0.0, 1.0]), np.array([-1.0, -1.0])), 1.0)
    assert not neg.ok
    assert 0.0 < neg.witness < 1e-6


@given(rates, rates, st.floats(0.1, 1e3))
def test_jc_is_cp_before_divergence(lam, gamma0, horizon):
    assert cp_check(JaynesCummings(lam, gamma0), horizon).ok


def test_cos_cp_violation_detected():
    with pytest.raises(ValueError, match="complete positivity"):
        DampedCosine(1.0, 4.0)
    p = DampedCosine(1.0, 4.0, check_cp=False)
    c = cp_check(p, 10.0)
    assert not c.ok
    assert c.argmin == pytest.approx(3 * math.pi / 8, rel=1e-12)


def test_cos_sign_changes():
    assert DampedCosine(1.0, 2.0).sign_changes(3.0) == pytest.approx([math.pi / 4, 3 * math.pi / 4])
    assert DampedCosine(1.0, 0.0).sign_changes(100.0) == []


def test_tabulated_interpolation_and_integral():
    t = np.array([0.0, 1.0, 2.0, 4.0])
    g = np.array([1.0, 3.0, -1.0, -1.0])
    p = Tabulated(t, g)
    assert float(p.gamma(0.5)) == pytest.approx(2.0)
    # exact trapezoid of the linear interpolant
    assert float(p.accumulated(2.0)) == pytest.approx(2.0 + 1.0)
    assert float(p.accumulated(1.5)) == pytest.approx(2.0 + 0.5 * (3.0 + 1.0) * 0.5)
    assert p.sign_changes(4.0) == pytest.approx([1.75])
    assert not p.markovian


def test_tabulated_zero_rate_is_markovian():
    p = Tabulated(np.array([0.0, 1.0]), np.zeros(2))
    assert p.markovian and p.accumulated(1.0) == 0.0


@pytest.mark.parametrize(
    "t,g",
    [([0.5, 1.0], [1.0, 1.0]), ([0.0, 1.0, 1.0], [1, 1, 1]), ([0.0], [1.0]), ([0.0, 1.0], [1.0, np.nan])],
)
def test_tabulated_validation(t, g):
    with pytest.raises(ValueError):
        Tabulated(np.array(t, dtype=float), np.array(g, dtype=float))


def test_tabulated_from_file(tmp_path):
    f = tmp_path / "rate.txt"
    f.write_text("# t gamma\n0 0\n1 2\n2 2\n")
    p = parse_profile(f"table:{f}")
    assert float(p.accumulated(2.0)) == pytest.approx(3.0)
    assert p.divergence_like is False


def test_parse_profile():
    assert parse_profile("jc:lambda=1,gamma0=0.25") == JaynesCummings(1.0, 0.25)
    assert parse_profile("const:gamma0=2") == Constant(2.0)
    assert parse_profile("cos:zeta=1,omega=2") == DampedCosine(1.0, 2.0)
    p = parse_profile("cos:zeta=1,omega=4", check_cp=False)
    assert p.omega == 4.0
    for bad in ("jc", "jc:lambda=1", "foo:x=1", "jc:lambda=1,gamma0=x", "const:gamma0=1,zeta=2"):
        with pytest.raises(ValueError):
            parse_profile(bad)


@pytest.mark.parametrize("p", [JaynesCummings(1.0, 0.25), Constant(2.0), DampedCosine(1.0, 2.0)])
def test_spec_round_trip(p):
    assert parse_profile(p.to_spec()) == p


def test_parameter_domains():
    for bad in (lambda: Constant(0.0), lambda: JaynesCummings(-1.0, 1.0), lambda: DampedCosine(0.0, 1.0),
                lambda: DampedCosine(1.0, -1.0)):
        with pytest.raises(ValueError):
            bad()
