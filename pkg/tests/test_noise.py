import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochch.noise import (
    ALPHA_EXISTENCE_MAX,
    CutoffSpec,
    SigmaSpec,
    coarsen_increments,
    cutoff_derivative,
    cutoff_eval,
    growth_violation,
    lipschitz_constant,
    sample_noise,
    sample_noise_batch,
    sigma_eval,
    standard_normals,
)


def test_sigma_default_values():
    s = SigmaSpec(alpha=0.1, c_sigma=2.0)
    assert sigma_eval(0.0, s) == pytest.approx(2.0)
    assert sigma_eval(3.0, s) == pytest.approx(2.0 * 10**0.05)


def test_sigma_forms():
    assert np.all(sigma_eval(np.array([-5.0, 7.0]), SigmaSpec(form="constant", c_sigma=3.0)) == 3.0)
    assert np.all(sigma_eval(np.array([1.0]), SigmaSpec(form="zero")) == 0.0)
    tab = SigmaSpec(form="custom_table", table=((-1.0, 1.0), (2.0, 4.0)))
    assert sigma_eval(0.0, tab) == pytest.approx(3.0)
    assert SigmaSpec(form="zero").is_zero
    assert SigmaSpec(form="constant").is_additive


def test_sigma_validation():
    with pytest.raises(ValueError):
        SigmaSpec(form="bogus")
    with pytest.raises(ValueError):
        SigmaSpec(alpha=0.0)
    with pytest.raises(ValueError):
        SigmaSpec(c_sigma=-1.0)
    with pytest.raises(ValueError):
        SigmaSpec(form="custom_table", table=((1.0, 0.0), (1.0, 1.0)))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.1, 10.0))
def test_growth_and_lipschitz(alpha, c):
    s = SigmaSpec(alpha=alpha, c_sigma=c)
    assert growth_violation(s) <= 1.0 + 1e-12
    # |d/du C (1+u^2)^{a/2}| <= C a |u| (1+u^2)^{a/2-1} <= C a
    assert lipschitz_constant(s) <= c * alpha + 1e-9


def test_existence_threshold():
    assert ALPHA_EXISTENCE_MAX == pytest.approx(1 / 9)


def test_cutoff_profile():
    spec = CutoffSpec(n=2.0)
    x = np.array([0.0, 2.0, 2.5, 3.0, 10.0])
    np.testing.assert_allclose(cutoff_eval(x, spec), [1, 1, 0.5, 0, 0])
    assert np.max(np.abs(cutoff_derivative(np.linspace(0, 5, 1001), spec))) == pytest.approx(1.5, rel=1e-6)
    with pytest.raises(ValueError):
        CutoffSpec(n=0.5)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 20), st.floats(0, 20), st.floats(1, 8))
def test_cutoff_monotone_and_lipschitz(a, b, n):
    spec = CutoffSpec(n=n)
    ca, cb = cutoff_eval(a, spec), cutoff_eval(b, spec)
    assert 0 <= ca <= 1
    if a <= b:
        assert ca >= cb
    assert abs(ca - cb) <= 1.5 * abs(a - b) + 1e-12


def test_counter_rng_reproducible_and_independent():
    a = standard_normals(7, 3, 11, (4, 4))
    b = standard_normals(7, 3, 11, (4, 4))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, standard_normals(7, 3, 12, (4, 4)))
    assert not np.array_equal(a, standard_normals(7, 4, 11, (4, 4)))
    assert not np.array_equal(a, standard_normals(8, 3, 11, (4, 4)))


def test_order_independence():
    # drawing step 5 first or last gives identical numbers
    late = [standard_normals(0, 0, s, 8) for s in range(6)][5]
    np.testing.assert_array_equal(late, standard_normals(0, 0, 5, 8))


def test_increment_variance():
    n, dt = 64, 1e-3
    inc = np.stack([sample_noise(s, 1, 0, n, 1, dt).nodal for s in range(400)])
    h = math.pi / n
    assert inc.var() == pytest.approx(dt / h, rel=0.03)
    assert abs(inc.mean()) < 4 * math.sqrt(dt / h / inc.size)


def test_batch_matches_single():
    b = sample_noise_batch(3, 2, [0, 5], 8, 2, 1e-3)
    np.testing.assert_array_equal(b[1], sample_noise(3, 2, 5, 8, 2, 1e-3).nodal)
    with pytest.raises(ValueError):
        sample_noise(0, 0, 0, 8, 1, 0.0)


def test_coarsen():
    inc = np.arange(12.0).reshape(6, 2)
    np.testing.assert_array_equal(coarsen_increments(inc, 3), [[6, 9], [24, 27]])
    with pytest.raises(ValueError):
        coarsen_increments(inc, 4)
