import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochch.spectral_core import (
    DomainError,
    NodalField,
    OperatorSpec,
    ShapeError,
    SpectralField,
    basis_eval,
    eps_1d,
    grid,
    lam,
    lambda_grid,
    multiplier,
    naive_to_nodal,
    naive_to_spectral,
    nodes,
    pad,
    semigroup_apply,
    to_nodal,
    to_nodal_fine,
    to_spectral,
)


def test_eps_orthonormal_on_midpoint_grid():
    n = 16
    x = nodes(n)
    E = np.array([eps_1d(j, x) for j in range(n)])
    gram = E @ E.T * (math.pi / n)
    np.testing.assert_allclose(gram, np.eye(n), atol=1e-13)


def test_eps_values():
    assert eps_1d(0, 0.3) == pytest.approx(1 / math.sqrt(math.pi))
    assert eps_1d(2, 0.0) == pytest.approx(math.sqrt(2 / math.pi))


def test_basis_eval_product_and_domain():
    v = basis_eval((1, 2), (0.4, 1.1))
    assert v == pytest.approx(eps_1d(1, 0.4) * eps_1d(2, 1.1))
    with pytest.raises(DomainError):
        basis_eval((1,), (4.0,))
    with pytest.raises(DomainError):
        basis_eval((1,), (-0.1,))


def test_lambda_values():
    assert lam((1, 2)) == 5
    assert lam(3) == 9
    g = lambda_grid(4, 2)
    assert g[3, 1] == 10
    assert not g.flags.writeable


def test_operator_validation():
    with pytest.raises(ValueError):
        OperatorSpec(rho=0.0)
    with pytest.raises(ValueError):
        OperatorSpec(qtilde=-1.0)
    op = OperatorSpec(2.0, 3.0)
    assert op.omega(4.0) == pytest.approx(2 * 16 + 3 * 4)


@pytest.mark.parametrize("d,n", [(1, 12), (2, 6), (3, 4)])
def test_fast_transforms_match_naive(d, n, rng):
    vals = rng.standard_normal((n,) * d)
    f = NodalField(vals, d)
    np.testing.assert_allclose(to_spectral(f).coeffs, naive_to_spectral(f).coeffs, atol=1e-12)
    u = SpectralField(rng.standard_normal((n,) * d), d)
    np.testing.assert_allclose(to_nodal(u).values, naive_to_nodal(u).values, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(2, 10), st.integers(0, 2**31 - 1))
def test_round_trip(d, n, seed):
    vals = np.random.default_rng(seed).standard_normal((n,) * d)
    back = to_nodal(to_spectral(NodalField(vals, d))).values
    np.testing.assert_allclose(back, vals, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 2), st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_parseval(d, n, seed):
    vals = np.random.default_rng(seed).standard_normal((n,) * d)
    f = NodalField(vals, d)
    assert to_spectral(f).l2_norm() == pytest.approx(f.lq_norm(2.0), rel=1e-12)


def test_basis_field_is_nodal_basis():
    n = 16
    u = SpectralField.basis((3,), n)
    np.testing.assert_allclose(to_nodal(u).values, eps_1d(3, nodes(n)), atol=1e-13)


def test_fine_grid_evaluates_same_function():
    n, m = 8, 20
    c = np.zeros(n)
    c[2], c[5] = 1.0, -0.5
    fine = to_nodal_fine(SpectralField(c, 1), m).values
    x = nodes(m)
    np.testing.assert_allclose(fine, eps_1d(2, x) - 0.5 * eps_1d(5, x), atol=1e-13)
    np.testing.assert_array_equal(pad(SpectralField(c, 1), 4).coeffs, c[:4])


def test_grid_shapes():
    xs = grid(5, 2)
    assert len(xs) == 2 and xs[0].shape == (5, 5)
    assert np.all(xs[0][:, 0] == nodes(5))


def test_shape_errors():
    with pytest.raises(ShapeError):
        SpectralField(np.zeros((3, 4)), 2)
    with pytest.raises(ShapeError):
        NodalField(np.zeros(3), 2)


def test_batched_fields():
    u = SpectralField(np.ones((5, 8)), 1)
    assert u.n == 8
    assert u.l2_norm().shape == (5,)


def test_multiplier_and_semigroup():
    op = OperatorSpec(1.0, 1.0)
    m = multiplier(8, 1, 0.1, op)
    k = np.arange(8)
    np.testing.assert_allclose(m, np.exp(-(k**4 + k**2) * 0.1))
    u = SpectralField(np.ones(8), 1)
    np.testing.assert_array_equal(semigroup_apply(u, 0.0, op).coeffs, u.coeffs)
    with pytest.raises(DomainError):
        semigroup_apply(u, -1.0, op)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_semigroup_property(s, t):
    op = OperatorSpec(1.0, 1.0)
    u = SpectralField(np.linspace(1, 2, 10), 1)
    a = semigroup_apply(semigroup_apply(u, s, op), t, op).coeffs
    b = semigroup_apply(u, s + t, op).coeffs
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)
