import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indefsl.bc import (
    COUPLED,
    DIRICHLET,
    FULL_RANK,
    LEFT_DIRICHLET_ROBIN,
    ROBIN_RIGHT_DIRICHLET,
    BCError,
    BCMatrices,
    canonicalize,
    coupled,
    named_bc,
    row_equivalent,
    validate_bc,
)

reals = st.floats(-5, 5, allow_nan=False)
nonzero = st.floats(0.1, 5) | st.floats(-5, -0.1)


def random_invertible(rng):
    while True:
        M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        if np.linalg.cond(M) < 1e3:
            return M


def assert_same_form(a, b, tol=1e-8):
    assert a.family == b.family
    pa, pb = a.parameters(), b.parameters()
    assert pa.keys() == pb.keys()
    for k in pa:
        np.testing.assert_allclose(np.asarray(pa[k]), np.asarray(pb[k]), atol=tol)


@pytest.mark.parametrize(
    "pair, family",
    [
        (named_bc("dirichlet"), DIRICHLET),
        (named_bc("neumann"), FULL_RANK),
        (named_bc("robin", d_a=1.0, d_b=-2.0), FULL_RANK),
        (named_bc("periodic"), COUPLED),
        (named_bc("antiperiodic"), COUPLED),
        (BCMatrices([[0, 1], [0, 0]], [[0, 3.0], [1, 0]]), LEFT_DIRICHLET_ROBIN),
        (BCMatrices([[1, 0], [0, 0]], [[-2.0, 0], [0, 1]]), ROBIN_RIGHT_DIRICHLET),
    ],
)
def test_families(pair, family):
    canon, M = canonicalize(pair)
    assert canon.family == family
    np.testing.assert_allclose(M @ pair.stacked, canon.matrices.stacked, atol=1e-12)


def test_periodic_parameters():
    canon, _ = canonicalize(named_bc("antiperiodic"))
    assert canon.c == pytest.approx(-1.0)
    assert canon.d == 0.0
    assert canon.unimodular and not canon.separated


@pytest.mark.parametrize(
    "C, D",
    [
        (np.zeros((2, 2)), np.zeros((2, 2))),
        (np.eye(2), np.array([[0.0, 1.0], [0.0, 0.0]])),
        ([[1, 0], [1, 0]], [[0, 0], [0, 0]]),
    ],
)
def test_inadmissible_pairs(C, D):
    with pytest.raises(BCError):
        validate_bc(C, D)


def test_coupled_needs_nonzero_c():
    with pytest.raises(BCError):
        coupled(0.0)


@settings(max_examples=40, deadline=None)
@given(nonzero, nonzero, reals, st.integers(0, 2**32 - 1))
def test_coupled_stable_under_row_transforms(cr, ci, d, seed):
    rng = np.random.default_rng(seed)
    pair = coupled(complex(cr, ci), d)
    ref, _ = canonicalize(pair)
    assert ref.c == pytest.approx(complex(cr, ci), rel=1e-12)
    assert ref.d == pytest.approx(d, abs=1e-12)
    for _ in range(5):
        moved = pair.transformed(random_invertible(rng))
        assert row_equivalent(moved, pair)
        assert_same_form(canonicalize(moved)[0], ref)


@settings(max_examples=40, deadline=None)
@given(reals, reals, reals, st.integers(0, 2**32 - 1))
def test_full_rank_stable_under_row_transforms(b11, b22, b12, seed):
    rng = np.random.default_rng(seed)
    B = np.array([[b11, b12], [b12, b22]])
    pair = BCMatrices(np.eye(2), B)
    ref, _ = canonicalize(pair)
    np.testing.assert_allclose(ref.B, B, atol=1e-12)
    assert_same_form(canonicalize(pair.transformed(random_invertible(rng)))[0], ref)


def test_row_equivalence_rejects_distinct_conditions():
    assert not row_equivalent(named_bc("periodic"), named_bc("antiperiodic"))
    assert row_equivalent(named_bc("periodic"), coupled(1.0))
