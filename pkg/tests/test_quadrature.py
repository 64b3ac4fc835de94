import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indefsl.quadrature import QuadratureError, integrate_pieces, tanh_sinh


@pytest.mark.parametrize(
    "f, lo, hi, exact",
    [
        (lambda x: x**2, 0.0, 1.0, 1.0 / 3.0),
        (lambda x: 1.0 / np.sqrt(x), 0.0, 1.0, 2.0),
        (lambda x: np.log(x), 0.0, 1.0, -1.0),
    ],
)
def test_endpoint_singularities(f, lo, hi, exact):
    assert tanh_sinh(f, lo, hi, rtol=1e-12) == pytest.approx(exact, rel=1e-10)


def test_singularity_in_absolute_coordinates():
    # 1 - x*x rounds near x = +-1, which caps the attainable accuracy
    val = tanh_sinh(lambda x: 1.0 / np.sqrt(1.0 - x * x), -1.0, 1.0, rtol=1e-8)
    assert val == pytest.approx(math.pi, rel=1e-8)


@pytest.mark.parametrize("hi", [0.5, 5.551115123125783e-17])
def test_logarithmic_mass_is_flagged_not_guessed(hi):
    # int_0^d 1/(x (1 - log x)^2) = 1/(1 - log d): about 1/709 of the mass sits
    # below the smallest normal float, so no float quadrature can converge
    with pytest.raises(QuadratureError):
        tanh_sinh(lambda x: 1.0 / (x * (1.0 - np.log(x)) ** 2), 0.0, hi, rtol=1e-6)


def test_reversed_limits_flip_sign():
    assert tanh_sinh(np.exp, 1.0, 0.0) == pytest.approx(-(math.e - 1.0), rel=1e-13)


def test_subnormal_nodes_do_not_overflow():
    # 1/(s |log s|^3) overflows at subnormal s; the mass below the smallest normal
    # float, 1/(2 log^2 tiny) ~ 1e-6, bounds the attainable accuracy
    mu = 1e-3
    val = tanh_sinh(lambda s: 1.0 / (s * np.abs(np.log(s)) ** 3), 0.0, mu, rtol=1e-6, max_level=12)
    assert val == pytest.approx(1.0 / (2.0 * math.log(mu) ** 2), rel=2e-4)


def test_non_finite_integrand_raises():
    with pytest.raises(QuadratureError):
        tanh_sinh(lambda x: np.full_like(x, np.nan), 0.0, 1.0)


@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=6), st.floats(-2, 0), st.floats(0.1, 2))
def test_polynomials_exact(coeffs, lo, width):
    p = np.polynomial.Polynomial(coeffs)
    hi = lo + width
    exact = p.integ()(hi) - p.integ()(lo)
    assert tanh_sinh(p, lo, hi, rtol=1e-13, atol=1e-14) == pytest.approx(exact, rel=1e-10, abs=1e-12)


def test_pieces_sum():
    f = lambda x: np.abs(x)  # noqa: E731
    assert integrate_pieces(f, [-1.0, 0.0, 2.0]) == pytest.approx(2.5, rel=1e-14)
