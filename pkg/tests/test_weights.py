import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indefsl.weights import (
    IntegralFn,
    SignPatternError,
    domination_profile,
    even_odd_parts,
    integral_I,
    integrate_abs,
    locally_odd_at_boundary,
    parse_weight,
    scaling_perturbation,
    shift_scale_weight,
)

from corpus import power_weight

FINAL_R = "pi/((1-x)*log((1-x)/e)^2)"



def test_declared_sign_pattern_is_checked():
    with pytest.raises(SignPatternError):
        parse_weight("sgn(x)", (-1.0, 1.0), [0.5])
    with pytest.raises(ValueError):
        parse_weight("sgn(x)", (-1.0, 1.0), [1.5])


def test_first_sign_and_pieces(sgn):
    assert sgn.first_sign == -1
    assert [p[2] for p in sgn.pieces()] == [-1, 1]
    assert sgn.sign_at(0.3) == 1


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.9, 1.5), st.floats(-0.5, 0.5), st.floats(0.01, 0.99), st.sampled_from([+1, -1]))
def test_exact_and_quadrature_integrals_agree(beta, c, mu, direction):
    w = power_weight(beta, c)
    exact = integral_I(w, 0.0, direction, mu)
    quad = integral_I(w, 0.0, direction, mu, method="quadrature")
    assert exact == pytest.approx(quad, rel=1e-9)


@given(st.floats(-1.0, 1.0), st.floats(0.0, 1.0))
def test_sgn_integral_is_length(x, frac):
    sgn = parse_weight("sgn(x)", (-1.0, 1.0), [0.0], ["x", "x"])
    mu = frac * (1.0 - x)
    assert integral_I(sgn, x, +1, mu) == pytest.approx(mu, rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("mu", [0.25, 1e-8, 1e-17, 1e-100, 1e-300])
def test_integral_next_to_singular_end_keeps_digits(mu):
    # below ulp(1) the point 1 - mu is not representable; the local variable keeps it exact
    w = parse_weight(FINAL_R, (0.0, 1.0), [], "-pi/(1-log(1-x))")
    expected = math.pi / (1.0 - math.log(mu))
    assert integral_I(w, 1.0, -1, mu) == pytest.approx(expected, rel=1e-12)


def test_short_segments_near_bounded_point(sgn):
    # the antiderivative differences cancel completely here
    assert integral_I(sgn, 0.5, +1, 1e-18) == pytest.approx(1e-18, rel=1e-12)


def test_integral_fn_reach(sgn):
    assert IntegralFn(sgn, -0.25, +1).reach == 1.25
    assert IntegralFn(sgn, -0.25, -1).reach == 0.75
    with pytest.raises(ValueError):
        integral_I(sgn, 0.5, +1, 0.75)


def test_integrate_abs_pieces(logw):
    # u = 1 - |x| turns each half into int_0^1 du / (u (1 - log u)^2) = 1
    assert integrate_abs(logw, -1.0, 1.0) == pytest.approx(2.0, rel=1e-14)
    assert integrate_abs(logw, -0.5, 0.5) == pytest.approx(integrate_abs(logw, -0.5, 0.5, method="quadrature"), rel=1e-10)


def test_even_odd_parts():
    w = parse_weight("sgn(x) + 0.25*x^2", (-1.0, 1.0), [0.0])
    even, odd = even_odd_parts(w)
    xs = np.linspace(-0.9, 0.9, 7)
    np.testing.assert_allclose(even(xs), 0.25 * xs**2, atol=1e-15)
    np.testing.assert_allclose(odd(xs), np.sign(xs), atol=1e-15)


def test_domination_of_scaling_perturbation(base_log):
    w = scaling_perturbation(base_log, 3.0, 1.0)
    prof = domination_profile(w, 0.0, 2.0 ** -np.arange(15, -1, -1.0))
    np.testing.assert_allclose(prof.rho, 0.5, rtol=1e-10)
    assert prof.classification == "weakly"


@pytest.mark.parametrize("beta", [-0.5, 0.5])
def test_power_family_is_strongly_odd_dominated(beta):
    prof = domination_profile(power_weight(beta, 0.3), 0.0, 2.0 ** -np.arange(15, -1, -1.0))
    assert prof.classification == "strongly odd"
    assert prof.slope == pytest.approx(1.0, abs=0.05)


def test_locally_odd_at_boundary(sgn, logw, base_log):
    assert locally_odd_at_boundary(sgn, 0.25)
    assert locally_odd_at_boundary(logw, 0.25)
    assert not locally_odd_at_boundary(scaling_perturbation(base_log, 3.0, 1.0), 0.25)


def test_scaling_perturbation_definition(base_log):
    A, B = 2.0, 4.0
    w = scaling_perturbation(base_log, A, B)
    assert (w.a, w.b) == (-0.25, 0.25)
    xs = np.array([-0.2, -0.01])
    np.testing.assert_allclose(w(xs), -A * base_log(-B * xs), rtol=1e-14)
    # the left half carries A/B times the mass of r on [0, 1], which is 1
    assert integrate_abs(w, -0.25, 0.0) == pytest.approx(A / B, rel=1e-14)


def test_shift_moves_mass(sgn):
    c, eps = 2.0, 0.25
    w = shift_scale_weight(sgn, c, eps)
    m2 = abs(c) ** 2
    assert w.a == pytest.approx(-1.0 - eps / m2)
    assert w.b == pytest.approx(1.0 - eps)
    assert w.sign_changes == (-1.0, 0.0)
    moved = integrate_abs(w, w.a, -1.0)
    assert moved == pytest.approx(m2 * integrate_abs(sgn, 1.0 - eps, 1.0), rel=1e-13)
