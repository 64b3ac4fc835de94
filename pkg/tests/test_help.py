import numpy as np
import pytest

from indefsl.expr import parse
from indefsl.helpineq import (
    HelpSpec,
    best_constant_estimate,
    bennewitz_condition2,
    help_verdict,
    homogeneous_solutions,
    periodic_extension_problem,
)
from indefsl.verdict import decide_rbp
from indefsl.criteria import NOT_PI, PI
from indefsl.weights import parse_weight

FINAL_R = "pi/((1-x)*log((1-x)/e)^2)"


@pytest.fixture(scope="module")
def bennewitz():
    return HelpSpec(parse_weight("1", (0.0, np.pi), [], "x"), parse("-1"), "-1")


@pytest.fixture(scope="module")
def q0():
    return HelpSpec(parse_weight("1", (0.0, 1.0), [], "x"))


@pytest.fixture(scope="module")
def final():
    w = parse_weight(FINAL_R, (0.0, 1.0), [], "-pi/(1-log(1-x))")
    return HelpSpec(w, parse(f"-({FINAL_R})"), "-r", parse("pi/(1-log(1-x))"), "pi/(1-log(1-x))")


def test_rejects_sign_changing_weight(sgn):
    with pytest.raises(ValueError):
        HelpSpec(sgn)


def test_bennewitz_is_valid(bennewitz):
    rep = help_verdict(bennewitz)
    assert rep.validity == "Valid"
    assert rep.form.norm <= 1e-9
    assert rep.condition1 == PI


def test_bennewitz_solutions(bennewitz):
    # -y'' - y = 0 has the basis cos, sin; at pi they take the values -1, 0
    sol = homogeneous_solutions(bennewitz)
    np.testing.assert_allclose(sol.u[:, -1], [-1.0, 0.0], atol=1e-9)


def test_free_problem_fails_boundary_form(q0):
    rep = help_verdict(q0)
    assert rep.validity == "Invalid"
    assert not rep.form.holds
    # with q = 0 the pair (1, x) gives M[1, 1] = [x]_0^1 = int r
    assert rep.form.matrix[1, 1].real == pytest.approx(1.0, abs=1e-12)


def test_final_example(final):
    rep = help_verdict(final)
    assert rep.form.holds
    assert rep.left.verdict == PI
    assert rep.right.verdict == NOT_PI
    assert rep.validity == "Invalid"
    assert decide_rbp(periodic_extension_problem(final)).outcome == "NoRBP"


def test_constant_estimates(bennewitz, q0):
    est = best_constant_estimate(bennewitz)
    assert est.classification == "bounded"
    assert est.converged
    assert 4.0 < est.K[-1] < 8.0
    assert best_constant_estimate(q0).classification == "divergent"


def test_form_respects_tolerance(q0):
    assert not bennewitz_condition2(q0, tol=1e-3).holds
