import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from edgegas.errors import NonConvex, ValidationError
from edgegas.fields import (ConfiningField, InteractionSpec, alpha_Q, fourier_h,
                            interaction_from_pairs, recombine, split)

terms = st.lists(st.tuples(st.floats(-2.0, 2.0), st.floats(0.2, 3.0)), min_size=1, max_size=4)


def test_alpha_quadratic():
    assert alpha_Q(ConfiningField((0, 0, 1.0)), 3.0) == 2.0


def test_alpha_quadratic_plus_quartic():
    assert alpha_Q(ConfiningField((0, 0, 1.0, 0, 1.0)), 3.0) == pytest.approx(2.0, abs=1e-14)


def test_alpha_quartic_is_nonconvex():
    with pytest.raises(NonConvex):
        alpha_Q(ConfiningField((0, 0, 0, 0, 1.0)), 3.0)


def test_alpha_sextic_interior_minimum():
    # Q'' = 2 - 12 x^2 + 30 x^4 has its minimum 0.8 at x^2 = 1/5
    Q = ConfiningField((0, 0, 1.0, 0, -1.0, 0, 1.0))
    assert alpha_Q(Q, 3.0) == pytest.approx(0.8, rel=1e-12)


@pytest.mark.parametrize("coeffs", [(0, 1.0, 1.0), (0, 0, -1.0), (1.0,), tuple([0] * 14 + [1.0])])
def test_invalid_fields(coeffs):
    with pytest.raises(ValidationError):
        ConfiningField(coeffs)


def test_missing_coeffs():
    with pytest.raises(ValidationError, match="Q.coeffs"):
        ConfiningField.from_config({})


def test_field_is_even():
    Q = ConfiningField((0.3, 0, 1.0, 0, 0.25))
    t = np.linspace(-4, 4, 101)
    assert np.array_equal(Q(t), Q(-t))


def test_gaussian_is_self_dual():
    h = InteractionSpec.gaussian(1.0)
    t = np.linspace(-5, 5, 41)
    assert np.allclose(fourier_h(h, t), np.exp(-t * t / 2), rtol=0, atol=1e-16)


def test_zero_interaction():
    h = InteractionSpec()
    assert h.is_zero and fourier_h(h, 1.3) == 0.0 and h(0.7) == 0.0


def test_negative_gaussian():
    h = InteractionSpec.gaussian(-1.0)
    t = np.linspace(0, 4, 9)
    assert np.allclose(h.fourier(t), -np.exp(-t * t / 2))
    assert h.negative_definite and not h.positive_definite


@settings(max_examples=15, deadline=None)
@given(terms)
def test_fourier_matches_quadrature(pairs):
    h = interaction_from_pairs(pairs)
    # h is even and below 1e-300 beyond 40 sigma_max, so integrate 2 int_0^R on a finite range
    R = 40.0 * max(s for _, s in pairs)
    for t in np.linspace(0.0, 4.0, 20):
        num = 2 * quad(h, 0.0, R, weight="cos", wvar=t, epsabs=1e-12, limit=500)[0]
        assert abs(num / math.sqrt(2 * math.pi) - fourier_h(h, t)) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(terms)
def test_split_reconstructs(pairs):
    h = interaction_from_pairs(pairs)
    sp = split(h)
    t = np.linspace(-5, 5, 100)
    assert np.max(np.abs(sp.plus(t) - sp.minus(t) - h(t))) <= 1e-14
    assert sp.plus.positive_definite and sp.minus.positive_definite
    assert sorted(recombine(sp).terms) == sorted(x for x in h.terms if x[0] != 0.0)


def test_split_examples():
    h = InteractionSpec(((0.5, 1.0), (-0.2, 2.0)))
    sp = split(h)
    assert sp.plus.terms == ((0.5, 1.0),) and sp.minus.terms == ((0.2, 2.0),)
    assert split(InteractionSpec.gaussian(-1.0)).plus.is_zero


@settings(max_examples=30, deadline=None)
@given(terms, st.floats(-10, 10))
def test_interaction_even(pairs, t):
    h = interaction_from_pairs(pairs)
    assert h(t) == h(-t)


def test_phi_conditions():
    h = InteractionSpec(((0.4, 1.0), (-0.3, 0.5)))
    t = np.array([1e-6, 1e-3])
    phi = t * t * np.exp(-h(t))
    assert np.allclose(phi / t**2, math.exp(-h(0.0)), rtol=1e-6)
    grid = np.linspace(-6, 6, 1000)
    assert np.all(grid * grid * np.exp(-h(grid)) > 0)


def test_interaction_config():
    h = InteractionSpec.from_config({"terms": [{"c": -0.1, "sigma": 1.0}]})
    assert h.terms == ((-0.1, 1.0),)
    with pytest.raises(ValidationError, match="sigma"):
        InteractionSpec.from_config({"terms": [{"c": 1.0}]})
    with pytest.raises(ValidationError):
        InteractionSpec(((1.0, -1.0),))


def test_sup_minus_d2():
    # -h'' for c exp(-t^2/2) peaks at t = 0 with value c
    assert InteractionSpec.gaussian(0.05).sup_minus_d2() == pytest.approx(0.05)
