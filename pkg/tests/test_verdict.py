import json

import pytest

from indefsl.bc import coupled, named_bc
from indefsl.expr import parse
from indefsl.verdict import HAS_RBP, NO_RBP, ProblemSpec, decide_rbp, replay_trail, subintervals
from indefsl.weights import parse_weight, scaling_perturbation


def test_subintervals_cover():
    w = parse_weight("sgn(x)*sgn(x-0.5)", (-1.0, 1.0), [0.0, 0.5])
    assert subintervals(w, "midpoint") == [(-1.0, 0.25), (0.25, 1.0)]
    lo, hi = subintervals(w, "thirds")[0]
    assert (lo, hi) == (-1.0, pytest.approx(1.0 / 6.0))


@pytest.mark.parametrize(
    "weight, bc, expected",
    [
        ("sgn", "dirichlet", HAS_RBP),
        ("sgn", "periodic", HAS_RBP),
        ("log", "dirichlet", HAS_RBP),
        ("log", "periodic", NO_RBP),
        ("log", "antiperiodic", NO_RBP),
        ("wod", "dirichlet", NO_RBP),
    ],
)
@pytest.mark.parametrize("rule", ["midpoint", "thirds"])
def test_verdicts_and_trail_replay(request, weight, bc, expected, rule):
    w = request.getfixturevalue({"sgn": "sgn", "log": "logw", "wod": "wod"}[weight])
    v = decide_rbp(ProblemSpec(w, named_bc(bc), interval_rule=rule))
    assert v.outcome == expected
    assert replay_trail(v.trail) == expected


def test_non_unimodular_coupling(logw):
    assert decide_rbp(ProblemSpec(logw, coupled(2.0, 1.0))).outcome == HAS_RBP
    assert decide_rbp(ProblemSpec(logw, coupled(0.5j, 0.0))).outcome == HAS_RBP


def test_two_turning_points():
    w = parse_weight("sgn(x)*sgn(x-0.5)", (-1.0, 1.0), [0.0, 0.5])
    v = decide_rbp(ProblemSpec(w, named_bc("dirichlet")))
    assert v.outcome == HAS_RBP
    assert len(v.locals) == 2


def test_scaling_variants(base_log):
    for A, B, expected in [(3.0, 1.0, HAS_RBP), (1.0, 2.0, HAS_RBP), (2.0, 2.0, NO_RBP), (1.0, 1.0, NO_RBP)]:
        w = scaling_perturbation(base_log, A, B)
        assert decide_rbp(ProblemSpec(w, named_bc("dirichlet"))).outcome == expected


def test_positive_weight_rejected(base_log):
    with pytest.raises(ValueError):
        ProblemSpec(base_log, named_bc("dirichlet"))


def test_from_json_round_trip(logw):
    p = ProblemSpec(logw, coupled(2.0, 1.0), parse("5*x"), "5*x")
    again = ProblemSpec.from_json(json.loads(json.dumps(p.to_json())))
    assert json.dumps(decide_rbp(again).to_json(), sort_keys=True) == json.dumps(decide_rbp(p).to_json(), sort_keys=True)
