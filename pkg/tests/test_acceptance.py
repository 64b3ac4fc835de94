"""Numbered acceptance criteria; a summary line per criterion is printed at the end of the run."""

import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import power_weight
from oracles import fd_richardson
from indefsl.bc import BCMatrices, canonicalize, coupled, named_bc
from indefsl.criteria import FAILS, HOLDS, NOT_PI, PI, ap_nec, ap_suf, api_plus, lemma_conditions
from indefsl.expr import parse
from indefsl.helpineq import HelpSpec, best_constant_estimate, help_verdict
from indefsl.schema import load_fixture, validate_problem
from indefsl.spectral import (
    GridFunction,
    eigenvalues,
    fundamental_matrix,
    gram_condition,
    jordan_chain_at_zero,
    phi_inverse,
    phi_transform,
    weighted_norm,
)
from indefsl.verdict import HAS_RBP, NO_RBP, ProblemSpec, decide_rbp
from indefsl.weights import domination_profile, integral_I, parse_weight, scaling_perturbation, shift_scale_weight


def fixture(name):
    return validate_problem(load_fixture(name))


def operator(name):
    doc = fixture(name)
    return doc.weight, doc.q, doc.bc


# -- 1 ------------------------------------------------------------------------

VERDICTS = {
    "sgn_dirichlet": HAS_RBP,
    "sgn_periodic": HAS_RBP,
    "sgn_antiperiodic": HAS_RBP,
    "sgn_coupled_c2": HAS_RBP,
    "log_dirichlet": HAS_RBP,
    "log_periodic": NO_RBP,
    "log_antiperiodic": NO_RBP,
    "log_coupled_c2": HAS_RBP,
    "wod_not_stable": NO_RBP,
    "scaling_A3_B1": HAS_RBP,
    "scaling_A2_B1": HAS_RBP,
    "scaling_A1_B2": HAS_RBP,
    "scaling_A2_B2": NO_RBP,
}


@pytest.mark.acceptance(1, "verdict suite on the example corpus (< 10 s)")
def test_verdict_suite():
    start = time.perf_counter()
    got = {}
    for name in VERDICTS:
        doc = fixture(name)
        got[name] = decide_rbp(ProblemSpec(doc.weight, doc.bc, doc.q)).outcome
    elapsed = time.perf_counter() - start
    assert got == VERDICTS
    for r in ("sgn", "log"):
        assert got[f"{r}_antiperiodic"] == got[f"{r}_periodic"]
    assert elapsed < 10.0


# -- 2 ------------------------------------------------------------------------

_T2 = {"elapsed": 0.0}


def _agree(weight):
    start = time.perf_counter()
    statuses = {fn(weight, 0.0).status for fn in (api_plus, ap_suf, ap_nec)}
    _T2["elapsed"] += time.perf_counter() - start
    return statuses


@pytest.mark.acceptance(2, "criteria equivalence on odd and odd-dominated weights (< 5 s)")
@settings(max_examples=20, deadline=None, derandomize=True)
@given(st.floats(0.05, 4.0), st.floats(-0.9, 0.9))
def test_criteria_agree_on_power_family(beta, c):
    # the even part c|x|^(beta+1) against the odd part |x|^beta gives rho(eps) ~ c eps
    assert _agree(power_weight(beta, c)) == {HOLDS}


@pytest.mark.acceptance(2, "criteria equivalence on odd and odd-dominated weights (< 5 s)")
@pytest.mark.parametrize("name, status", [("sgn_dirichlet", HOLDS), ("log_dirichlet", HOLDS), ("wod_not_stable", FAILS)])
def test_criteria_agree_on_odd_weights(name, status):
    assert _agree(fixture(name).weight) == {status}


@pytest.mark.acceptance(2, "criteria equivalence on odd and odd-dominated weights (< 5 s)")
@settings(max_examples=15, deadline=None, derandomize=True)
@given(st.floats(0.05, 4.0))
def test_lemma_conditions_agree_on_powers(beta):
    start = time.perf_counter()
    assert set(lemma_conditions(lambda x: x**beta, 0.5).values()) == {HOLDS}
    _T2["elapsed"] += time.perf_counter() - start


@pytest.mark.acceptance(2, "criteria equivalence on odd and odd-dominated weights (< 5 s)")
def test_lemma_conditions_agree():
    start = time.perf_counter()
    assert set(lemma_conditions(None, 0.5, log_f=lambda x: -1.0 / x).values()) == {HOLDS}
    assert set(lemma_conditions(lambda x: 1.0 / (1.0 - np.log(x)), 0.5).values()) == {FAILS}
    _T2["elapsed"] += time.perf_counter() - start
    assert _T2["elapsed"] < 5.0


# -- 3 ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def base_weight():
    return parse_weight("1/(x*(1-log(x))^2)", (0.0, 1.0), [], "1/(1-log(x))")


@pytest.mark.acceptance(3, "sandwich bounds for I+ and I- around the odd part (slack >= -1e-10)")
@pytest.mark.parametrize("A", [3.0, 2.0, 5.0])
def test_sandwich(base_weight, A):
    w = scaling_perturbation(base_weight, A, 1.0)
    eps = 0.5
    rho = float(np.max(domination_profile(w, 0.0, [eps]).rho))
    assert rho == pytest.approx((A - 1.0) / (A + 1.0), rel=1e-9)
    mu = np.geomspace(1e-12, eps, 400)
    odd = 0.5 * (1.0 + A) / (1.0 - np.log(mu))  # int_0^mu r^o in closed form
    for direction in (+1, -1):
        I = np.asarray(integral_I(w, 0.0, direction, mu), dtype=float)
        slack_lo = (I - (1.0 - rho) * odd) / odd
        slack_hi = ((1.0 + rho) * odd - I) / odd
        assert slack_lo.min() >= -1e-10
        assert slack_hi.min() >= -1e-10


# -- 4 ------------------------------------------------------------------------


@pytest.mark.acceptance(4, "sgn Dirichlet spectrum against a finite-difference oracle (< 60 s)")
def test_spectral_correctness():
    start = time.perf_counter()
    op = operator("sgn_dirichlet")
    spec = eigenvalues(op, max_count=10)
    lams = spec.eigenvalues
    pos = np.sort(lams.real[lams.real > 0])[:5]
    neg = -np.sort(-lams.real[lams.real < 0])[:5]
    ref = fd_richardson(10**4, 5)
    np.testing.assert_allclose(pos, ref, rtol=1e-6)
    assert np.max(np.abs(pos + neg)) <= 1e-8
    assert np.max(spec.residuals) <= 1e-6
    probes = [*lams, 50.0 + 30.0j, -75.0 + 5.0j, 1e-3j]
    drift = max(abs(fundamental_matrix(op, z).wronskian - 1.0) for z in probes)
    assert drift <= 1e-9
    assert time.perf_counter() - start < 60.0


# -- 5 ------------------------------------------------------------------------


@pytest.mark.acceptance(5, "Jordan chain at zero for sgn periodic")
def test_jordan_chain():
    op = operator("sgn_periodic")
    spec = eigenvalues(op, max_count=4, with_functions=True)
    zero = [f for f in spec.root_functions if abs(f.lam) < 1e-8]
    assert [f.order for f in zero] == [0, 1]
    f0 = zero[0].nodes[:, 0]
    np.testing.assert_allclose(f0 / f0[0], 1.0, atol=1e-10)
    x = np.linspace(-1.0, 1.0, 2001)
    ch = jordan_chain_at_zero(op, x)
    assert np.max(np.abs(ch.g0 - x * (1.0 - np.abs(x)) / 2.0)) <= 1e-10
    np.testing.assert_allclose(ch.f0(x), 1.0)
    assert ch.ell_residual <= 1e-10


# -- 6 ------------------------------------------------------------------------


@pytest.mark.acceptance(6, "unitary equivalence under the boundary shift")
def test_unitary_equivalence():
    sgn = fixture("sgn_dirichlet").weight
    c, eps = 2.0, 0.25
    zero = parse("0")
    shifted = shift_scale_weight(sgn, c, eps)
    s1 = eigenvalues((sgn, zero, coupled(c, 0.0)), max_count=10)
    s2 = eigenvalues((shifted, zero, coupled(c, 0.0)), max_count=10)
    assert s1.eigenvalues.size == s2.eigenvalues.size == 10
    assert np.max(np.abs(s1.eigenvalues - s2.eigenvalues)) <= 1e-8

    rng = np.random.default_rng(20260116)
    edges = np.concatenate([np.linspace(-1.0, 1.0 - eps, 141), np.linspace(1.0 - eps, 1.0, 21)[1:]])
    x, widths = 0.5 * (edges[1:] + edges[:-1]), np.diff(edges)
    for _ in range(20):
        f = GridFunction(x, rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size), widths)
        g = phi_transform(f, -1.0, 1.0, c, eps)
        defect = abs(weighted_norm(g, shifted) - weighted_norm(f, sgn)) / weighted_norm(f, sgn)
        assert defect <= 1e-10
        np.testing.assert_allclose(phi_inverse(g, -1.0, 1.0, c, eps).values, f.values, atol=1e-14)


# -- 7 ------------------------------------------------------------------------


@pytest.mark.acceptance(7, "Gram conditioning grows only without the basis property (< 120 s)")
def test_gram_growth():
    start = time.perf_counter()
    k_sgn = gram_condition(operator("sgn_periodic"), [10, 20, 30]).kappa
    k_log = gram_condition(operator("log_periodic"), [10, 20, 30]).kappa
    elapsed = time.perf_counter() - start
    print(f"kappa sgn {k_sgn}, log {k_log}, {elapsed:.1f} s")
    assert k_sgn[30] / k_sgn[10] < 1.5
    assert k_log[10] < k_log[20] < k_log[30]
    assert k_log[30] / k_log[10] > 1.5
    assert elapsed < 120.0


# -- 8 ------------------------------------------------------------------------


@pytest.mark.acceptance(8, "HELP inequality suite (< 30 s)")
def test_help_suite():
    start = time.perf_counter()
    ben = fixture("bennewitz_pi")
    ben_spec = HelpSpec(ben.weight, ben.q, ben.q_text, ben.q_antiderivative, ben.q_antiderivative_text)
    rep = help_verdict(ben_spec)
    assert rep.validity == "Valid"
    assert rep.form.norm <= 1e-9

    # q = 0: the form on the second canonical solution is int_0^b r
    free = [
        (fixture("help_q0").weight, 1.0),
        (parse_weight("1 + x^2", (0.0, 2.0), [], "x + x^3/3"), 2.0 + 8.0 / 3.0),
        (parse_weight("sqrt(x)", (0.0, 1.0), [], "2*x^1.5/3"), 2.0 / 3.0),
    ]
    for weight, mass in free:
        rq = help_verdict(HelpSpec(weight))
        assert rq.validity == "Invalid"
        assert rq.form.matrix[1, 1].real == pytest.approx(mass, rel=1e-9)

    fin = fixture("final_example")
    fin_spec = HelpSpec(fin.weight, fin.q, fin.q_text, fin.q_antiderivative, fin.q_antiderivative_text)
    rf = help_verdict(fin_spec)
    assert rf.form.holds
    assert rf.left.verdict == PI
    assert rf.right.verdict == NOT_PI
    assert rf.validity == "Invalid"

    labels = {"Valid": "bounded", "Invalid": "divergent"}
    for spec, verdict in [(ben_spec, rep), (HelpSpec(free[0][0]), help_verdict(HelpSpec(free[0][0]))), (fin_spec, rf)]:
        assert best_constant_estimate(spec).classification == labels[verdict.validity]
    assert time.perf_counter() - start < 30.0


# -- 9 ------------------------------------------------------------------------


@pytest.mark.acceptance(9, "verdict invariance in q and d; stable boundary normal form")
@pytest.mark.parametrize("name", ["log_coupled_c2", "sgn_periodic", "scaling_A3_B1"])
def test_invariance(name):
    doc = fixture(name)
    w = doc.weight
    fam = canonicalize(doc.bc)[0]
    c = fam.c if fam.c is not None else 1.0
    dumps = set()
    for q_text in ("0", "-r", "5*x"):
        q = parse(f"-({doc.raw['weight']['expr']})") if q_text == "-r" else parse(q_text)
        for d in (0.0, 1.0, -3.0):
            bc = coupled(c, d) if fam.c is not None else doc.bc
            dumps.add(decide_rbp(ProblemSpec(w, bc, q, q_text)).dumps())
    assert len(dumps) == 1


@pytest.mark.acceptance(9, "verdict invariance in q and d; stable boundary normal form")
def test_canonical_form_stability():
    rng = np.random.default_rng(7)
    pairs = [coupled(2.0 - 0.5j, 1.5), named_bc("periodic"), named_bc("antiperiodic"), BCMatrices(np.eye(2), np.array([[1.0, 0.3], [0.3, -2.0]]))]
    for pair in pairs:
        ref = canonicalize(pair)[0]
        for _ in range(20):
            M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            if abs(np.linalg.det(M)) < 1e-2:
                continue
            got = canonicalize(pair.transformed(M))[0]
            assert got.family == ref.family
            for key, val in ref.parameters().items():
                np.testing.assert_allclose(np.asarray(got.parameters()[key]), np.asarray(val), atol=1e-8)
