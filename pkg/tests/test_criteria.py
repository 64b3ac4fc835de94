import math

import numpy as np
import pytest

from indefsl.criteria import (
    FAILS,
    HOLDS,
    NOT_PI,
    PI,
    DegenerateFunctionError,
    ap_nec,
    ap_suf,
    api_plus,
    lemma_conditions,
    pi_test,
    turning_point_criteria,
    volkmer_test,
)
from indefsl.weights import scaling_perturbation


@pytest.mark.parametrize("beta", [0.05, 0.5, 1.0, 3.0])
def test_powers_are_positively_increasing(beta):
    rep = pi_test(lambda x: x**beta, 0.5)
    assert rep.verdict == PI
    t, C = rep.witness
    assert C == pytest.approx(t**beta, rel=1e-12)


@pytest.mark.parametrize("F", [lambda x: 1.0 / (1.0 - np.log(x)), lambda x: 1.0 / np.log(np.log(1.0 / x) + math.e)])
def test_slowly_varying_is_not(F):
    assert pi_test(F, 0.5).verdict == NOT_PI


def test_rapid_decay_through_log():
    rep = pi_test(None, 0.5, log_f=lambda x: -1.0 / x)
    assert rep.verdict == PI


def test_ratio_table_shape():
    rep = pi_test(np.sqrt, 0.5)
    assert rep.ratios.shape == (len(rep.t_grid), rep.x.size)
    rows = list(rep.rows())
    assert len(rows) == rep.ratios.size
    np.testing.assert_allclose(rep.ratios[0], math.sqrt(0.5))


def test_degenerate_function_rejected():
    with pytest.raises(DegenerateFunctionError):
        pi_test(lambda x: np.where(x < 1e-3, 0.0, x), 0.5)


def test_non_monotone_rejected():
    with pytest.raises(ValueError):
        pi_test(lambda x: 2 + np.sin(1 / x), 0.5)


def test_lemma_conditions_on_classes():
    assert lemma_conditions(np.sqrt, 0.5) == {"ii": HOLDS, "iii": HOLDS, "iv": HOLDS}
    assert lemma_conditions(lambda x: 1 / (1 - np.log(x)), 0.5) == {"ii": FAILS, "iii": FAILS, "iv": FAILS}


def test_criteria_on_sgn(sgn):
    for fn in (api_plus, ap_suf, ap_nec):
        assert fn(sgn, 0.0).status == HOLDS


def test_criteria_on_slowly_varying_odd_weight(wod):
    for fn in (api_plus, ap_suf, ap_nec):
        assert fn(wod, 0.0).status == FAILS


def test_volkmer_with_scaling_witness(base_log):
    # r(x)/r(-B x) is the constant -A on the left, the hypothesis of the criterion
    w = scaling_perturbation(base_log, 3.0, 1.0)
    assert volkmer_test(w, 0.0, -1.0, 0.5).status == HOLDS


def test_bundle_serialises(sgn):
    js = turning_point_criteria(sgn, 0.0).to_json()
    assert {"pi_plus", "pi_minus", "API+", "APsuf", "APnec", "volkmer", "domination"} <= set(js)
