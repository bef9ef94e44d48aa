import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from stochch.greens import (
    compose,
    convolve_initial,
    exp_integral,
    exp_integral_scaling,
    green_eval,
    green_matrix,
    increment_space,
    increment_tail,
    increment_time,
    initial_value_constant,
    truncation,
    verify_increment_integrals,
    verify_pointwise_bounds,
)
from stochch.spectral_core import (
    DomainError,
    NodalField,
    OperatorSpec,
    SpectralField,
    basis_eval,
    nodes,
    semigroup_apply,
    to_nodal,
)

OP = OperatorSpec(1.0, 1.0)


def test_two_mode_oracle():
    # at large t only k = 0, 1 matter: G = 1/pi + (2/pi) cos x cos y e^{-2t}
    t, x, y = 3.0, 0.7, 2.1
    want = 1 / math.pi + 2 / math.pi * math.cos(x) * math.cos(y) * math.exp(-2 * t)
    assert green_eval(x, y, t, OP) == pytest.approx(want, rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, math.pi), st.floats(0, math.pi), st.floats(1e-3, 1.0))
def test_symmetry(x, y, t):
    assert green_eval(x, y, t, OP) == pytest.approx(green_eval(y, x, t, OP), rel=1e-12, abs=1e-14)


def test_mass_is_one():
    # integral over y equals 1 because omega_0 = 0
    n = 400
    ys = nodes(n)[:, None]
    xs = np.full_like(ys, 0.9)
    g = green_matrix(xs, ys, 0.01, OP)
    assert g.sum() * math.pi / n == pytest.approx(1.0, rel=1e-10)


def test_neumann_condition():
    for x in (0.0, math.pi):
        v = green_eval(x, 1.0, 0.05, OP, dx=(1,))
        assert abs(v) < 1e-12


def test_time_derivative_matches_difference():
    x, y, t, h = 0.5, 0.8, 0.02, 1e-6
    fd = (green_eval(x, y, t + h, OP) - green_eval(x, y, t - h, OP)) / (2 * h)
    assert green_eval(x, y, t, OP, kind="dt") == pytest.approx(fd, rel=1e-6)


def test_pde_identity():
    # dG/dt = -(rho Lap^2 - qtilde Lap) G, checked through the y-Laplacian of G
    x, y, t, h = 0.5, 0.8, 0.02, 1e-3
    lap = green_eval(x, y, t, OP, kind="laplacian")
    fd = (green_eval(x, y + h, t, OP) - 2 * green_eval(x, y, t, OP)
          + green_eval(x, y - h, t, OP)) / h**2
    assert lap == pytest.approx(fd, rel=1e-5)


def test_truncation_and_errors():
    assert OP.rho * truncation(1e-3, OP) ** 4 * 1e-3 > 30
    with pytest.raises(DomainError):
        truncation(0.0, OP)
    with pytest.raises(DomainError):
        green_eval(4.0, 1.0, 0.1, OP)
    with pytest.raises(DomainError):
        green_eval(1.0, 1.0, -0.1, OP)


def test_kernel_reproduces_semigroup():
    n = 32
    c = np.zeros(n)
    c[[1, 3, 4]] = [1.0, -0.5, 0.25]
    u0 = SpectralField(c, 1)
    t = 0.01
    want = to_nodal(semigroup_apply(u0, t, OP)).values
    ys = nodes(n)
    u0n = to_nodal(u0).values
    got = []
    for x in ys[::5]:
        g = green_matrix(np.full((n, 1), x), ys[:, None], t, OP, K=n)
        got.append(np.sum(g * u0n) * math.pi / n)
    np.testing.assert_allclose(got, want[::5], atol=1e-12)


def test_exp_integral_closed_form():
    for d in (1, 2, 3):
        c, t = 0.7, 0.3
        a = c * t ** (-1 / 3)
        sphere = 2 * math.pi ** (d / 2) / special.gamma(d / 2)
        want = sphere * 0.75 * special.gamma(3 * d / 4) * a ** (-3 * d / 4)
        assert exp_integral(c, t, d) == pytest.approx(want, rel=1e-10)
    with pytest.raises(DomainError):
        exp_integral(-1.0, 1.0, 1)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_scaling_exponent(d):
    rep = exp_integral_scaling(1.0, [0.01, 0.1, 1.0, 16.0], d)
    assert rep.exponent == pytest.approx(d / 4, abs=1e-10)
    assert rep.spread < 1e-10


def test_compose_oracle():
    x, y = np.array([1.0]), np.array([0.4])
    for lap in (False, True):
        kind = "laplacian" if lap else "plain"
        err = compose(x, y, 0.02, 0.01, OP, with_laplacian=lap) - green_eval(x, y, 0.02, OP, kind=kind)
        assert abs(err) < 1e-8
    with pytest.raises(DomainError):
        compose(x, y, 0.02, 0.03, OP)


def test_pointwise_bounds_d1():
    fit = verify_pointwise_bounds(1, OP)
    assert fit.passed
    assert fit.exponent_fit == pytest.approx(-0.25, abs=0.05)
    assert fit.c2 > 0


def test_pointwise_bounds_falsifiable():
    fit = verify_pointwise_bounds(1, OP, c2=5.0)
    assert not fit.passed
    assert fit.max_violation > 1


def test_pointwise_bound_derivatives():
    ft = verify_pointwise_bounds(1, OP, derivative="t")
    assert ft.passed and ft.exponent_fit == pytest.approx(-1.25, abs=0.1)
    fx = verify_pointwise_bounds(1, OP, derivative=(1,))
    assert fx.passed
    with pytest.raises(ValueError):
        verify_pointwise_bounds(1, OP, derivative=(3,))


def test_increment_integrals_monotone():
    x = np.array([1.0])
    a = increment_space(x, x + 1e-2, 0.5, OP, K=64)
    b = increment_space(x, x + 2e-2, 0.5, OP, K=64)
    assert 0 < a < b
    assert increment_time(x, 0.25, 0.25 + 1e-5, OP, K=64) > 0
    assert increment_tail(x, 0.25, 0.25 + 1e-5, OP, K=64) < increment_tail(x, 0.25, 0.25 + 1e-4, OP, K=64)


def test_increment_exponents_d1():
    rep = verify_increment_integrals(1, OP)
    assert rep.passed
    assert rep.space_exponent == pytest.approx(2.0, abs=0.1)
    assert rep.tail_exponent == pytest.approx(0.75, abs=0.05)


def test_initial_value_constant():
    rng = np.random.default_rng(0)
    u0 = NodalField(rng.standard_normal(32), 1)
    v = convolve_initial(u0, 0.0, OP)
    np.testing.assert_allclose(to_nodal(v).values, u0.values, atol=1e-12)
    c = initial_value_constant(u0, np.logspace(-4, 0, 6), OP, q=2.0)
    # L2 contraction
    assert c <= 1.0 + 1e-12
    assert basis_eval((0,), (1.0,)) == pytest.approx(1 / math.sqrt(math.pi))
