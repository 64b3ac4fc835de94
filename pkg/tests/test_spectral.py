import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indefsl.bc import coupled, named_bc
from indefsl.expr import parse
from indefsl.spectral import (
    GridFunction,
    char_det,
    eigenvalues,
    fundamental_matrix,
    gram_condition,
    jordan_chain_at_zero,
    phi_inverse,
    phi_transform,
    weighted_norm,
)
from indefsl.weights import parse_weight, shift_scale_weight
from oracles import fd_indefinite, sgn_dirichlet_exact


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 100), st.floats(0, 2 * np.pi))
def test_wronskian_is_one(radius, angle, ):
    sgn = parse_weight("sgn(x)", (-1.0, 1.0), [0.0], ["x", "x"])
    fm = fundamental_matrix((sgn, parse("0"), None), radius * np.exp(1j * angle))
    assert abs(fm.wronskian - 1.0) <= 1e-9


def test_char_det_at_zero(sgn, zero, dirichlet, periodic):
    # at lambda = 0 the Dirichlet determinant is the length of the interval
    assert char_det((sgn, zero, dirichlet), 0.0) == pytest.approx(2.0, rel=1e-12)
    assert abs(char_det((sgn, zero, periodic), 0.0)) < 1e-12


def test_sgn_dirichlet_against_closed_form(sgn, zero, dirichlet):
    spec = eigenvalues((sgn, zero, dirichlet), max_count=10)
    pos = np.sort(spec.eigenvalues.real[spec.eigenvalues.real > 0])
    np.testing.assert_allclose(pos, sgn_dirichlet_exact(5), rtol=1e-10)
    np.testing.assert_allclose(np.abs(spec.eigenvalues.imag), 0.0, atol=1e-9)
    assert np.all(spec.multiplicities == 1)
    assert spec.residuals.max() <= 1e-8


def test_non_real_eigenvalues_against_finite_differences(sgn, dirichlet):
    q = parse("-20")
    spec = eigenvalues((sgn, q, dirichlet), max_count=8)
    lams = spec.eigenvalues
    # a real problem has a spectrum closed under conjugation, and r odd, q even adds -lambda
    for z in lams:
        assert np.min(np.abs(lams - np.conj(z))) < 1e-8
        assert np.min(np.abs(lams + z)) < 1e-8
    nonreal = lams[np.abs(lams.imag) > 1e-6]
    assert nonreal.size == 4
    ref = fd_indefinite(sgn, q, 4001, nonreal)
    np.testing.assert_allclose(ref, nonreal, rtol=1e-5)


def test_sgn_periodic_zero_is_a_jordan_block(sgn, zero, periodic):
    spec = eigenvalues((sgn, zero, periodic), max_count=6, with_functions=True)
    k = int(np.argmin(np.abs(spec.eigenvalues)))
    assert abs(spec.eigenvalues[k]) < 1e-8
    assert spec.multiplicities[k] == 2
    orders = [f.order for f in spec.root_functions if abs(f.lam) < 1e-8]
    assert orders == [0, 1]


def test_jordan_chain_closed_form(sgn, zero, periodic):
    ch = jordan_chain_at_zero((sgn, zero, periodic))
    assert ch.gamma == pytest.approx(-0.5, abs=1e-14)
    np.testing.assert_allclose(ch.g0, ch.x * (1 - np.abs(ch.x)) / 2, atol=1e-12)
    assert ch.ell_residual < 1e-10


def test_jordan_chain_preconditions(sgn, logw, zero, dirichlet, periodic):
    with pytest.raises(ValueError):
        jordan_chain_at_zero((sgn, zero, dirichlet))
    with pytest.raises(ValueError):
        jordan_chain_at_zero((sgn, parse("1"), periodic))
    w = parse_weight("sgn(x)*(1 + 0.5*x)", (-1.0, 1.0), [0.0])
    with pytest.raises(ValueError):
        jordan_chain_at_zero((w, zero, periodic))


def test_gram_sections(sgn, zero, periodic):
    spec = gram_condition((sgn, zero, periodic), [2, 4])
    ks = [spec.kappa_by_size[n] for n in sorted(spec.kappa_by_size)]
    assert ks[0] == pytest.approx(1.0)
    # nested principal sections: extreme singular values interlace, so kappa never drops
    assert all(k2 >= k1 * (1 - 1e-12) for k1, k2 in zip(ks, ks[1:]))
    assert spec.kappa[4] == spec.kappa_by_size[8]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.complex_numbers(min_magnitude=0.5, max_magnitude=3.0))
def test_phi_is_an_isometry(seed, c):
    sgn = parse_weight("sgn(x)", (-1.0, 1.0), [0.0], ["x", "x"])
    eps = 0.25
    rng = np.random.default_rng(seed)
    edges = np.concatenate([np.linspace(-1, 1 - eps, 81), np.linspace(1 - eps, 1, 11)[1:]])
    f = GridFunction(0.5 * (edges[1:] + edges[:-1]), rng.standard_normal(90) + 1j * rng.standard_normal(90), np.diff(edges))
    g = phi_transform(f, -1.0, 1.0, c, eps)
    shifted = shift_scale_weight(sgn, c, eps)
    assert weighted_norm(g, shifted) == pytest.approx(weighted_norm(f, sgn), rel=1e-12)
    back = phi_inverse(g, -1.0, 1.0, c, eps)
    np.testing.assert_allclose(back.values, f.values, atol=1e-14)
    np.testing.assert_allclose(back.x, f.x, atol=1e-14)


def test_to_json_and_csv(tmp_path, sgn, zero, dirichlet):
    spec = eigenvalues((sgn, zero, dirichlet), max_count=4)
    js = spec.to_json()
    assert len(js["eigenvalues"]) == 4
    spec.write_eigenvalues_csv(tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "re,im,multiplicity,residual"
