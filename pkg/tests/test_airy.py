import math

import mpmath as mp
import numpy as np
import pytest

from edgegas import quadrature as qd
from edgegas.airy import (_nystrom_quadratic, airy, airy_kernel, airy_kernel_matrix, airy_values,
                          log_tw_tail_asymptotic, tracy_widom_cdf, tracy_widom_cdf_linear,
                          tracy_widom_pair, tracy_widom_sf, tw_tail_asymptotic)
from edgegas.errors import OutOfRange

from oracles import airy_integral_kernel

AI0 = 3 ** (-2 / 3) / math.gamma(2 / 3)
AIP0 = -(3 ** (-1 / 3)) / math.gamma(1 / 3)


def test_airy_at_zero():
    v = airy(0.0)
    assert v.ai == pytest.approx(AI0, rel=1e-15)
    assert v.aip == pytest.approx(AIP0, rel=1e-15)
    assert v.ai == pytest.approx(0.355028053887817, abs=1e-15)


def test_airy_against_mpmath():
    mp.mp.dps = 30
    t = np.concatenate([np.linspace(-12, 9, 211), np.linspace(9.01, 40, 60)])
    ai, aip = airy_values(t)
    ref = np.array([float(mp.airyai(v)) for v in t])
    refp = np.array([float(mp.airyai(v, derivative=1)) for v in t])
    inner = np.abs(t) <= 9
    assert np.max(np.abs(ai - ref)[inner]) <= 1e-12
    assert np.max(np.abs(aip - refp)[inner]) <= 1e-12
    outer = ~inner
    assert np.max(np.abs(ai / ref - 1)[outer]) <= 1e-9
    assert np.max(np.abs(aip / refp - 1)[outer]) <= 1e-9


def test_airy_large_argument_asymptotics():
    t = 25.0
    lead = (4 * math.pi * math.sqrt(t)) ** -0.5 * math.exp(-2 / 3 * t**1.5)
    assert abs(airy(t).ai / lead - 1) <= 1e-3


def test_ode_residual():
    t = np.linspace(-10, 12, 89)
    h = 1e-3
    d = lambda s: airy_values(s)[1]  # noqa: E731
    aipp = (-d(t + 2 * h) + 8 * d(t + h) - 8 * d(t - h) + d(t - 2 * h)) / (12 * h)
    assert np.max(np.abs(aipp - t * airy_values(t)[0])) <= 1e-9


def test_out_of_range():
    with pytest.raises(OutOfRange):
        airy(-12.5)
    with pytest.raises(OutOfRange):
        airy_values(np.array([0.0, 41.0]))


def test_kernel_diagonal_at_zero():
    assert airy_kernel(0.0, 0.0) == pytest.approx(AIP0**2, rel=1e-14)
    assert airy_kernel(0.0, 0.0) == pytest.approx(0.066987, abs=1e-6)
    ref = float(mp.quad(lambda r: mp.airyai(r) ** 2, [0, mp.inf]))
    assert airy_kernel(0.0, 0.0) == pytest.approx(ref, rel=1e-12)


def test_kernel_symmetric(rng):
    s, t = rng.uniform(-8, 8, (2, 100))
    assert np.max(np.abs(airy_kernel(s, t) - airy_kernel(t, s))) <= 1e-15


def test_kernel_continuous_across_switch():
    t = 1.3
    for d in (0.9e-4, 1.1e-4):
        # the quotient and the diagonal expansion agree near the switch
        assert airy_kernel(t + d, t) == pytest.approx(airy_kernel(t + 2 * d, t) + 0.5 * d * airy(t).ai ** 2,
                                                      abs=1e-9)


def test_kernel_matrix_matches_pointwise(rng):
    y = np.sort(rng.uniform(-3, 5, 12))
    y[4] = y[3] + 5e-5
    M = airy_kernel_matrix(y)
    assert np.allclose(M, airy_kernel(y[:, None], y[None, :]), rtol=0, atol=1e-15)


def test_integral_representation(rng):
    for s, t in rng.uniform(0, 4, (20, 2)):
        assert abs(airy_kernel(s, t) - airy_integral_kernel(s, t)) <= 1e-7


def test_kernel_sandwich():
    g = np.linspace(1, 20, 12)
    S, T = np.meshgrid(g, g)
    K = airy_kernel(S, T)
    scaled = K * (S * T) ** 0.25 * (np.sqrt(S) + np.sqrt(T)) * np.exp(2 / 3 * (S**1.5 + T**1.5))
    assert 1 / 30 <= scaled.min() and scaled.max() <= 30
    # on the diagonal K(t, t) ~ exp(-4/3 t^{3/2}) / (8 pi t), so the scaled value tends to 1 / (4 pi)
    assert scaled[-1, -1] == pytest.approx(1 / (4 * math.pi), rel=0.02)


def test_kernel_upper_limit():
    assert airy_kernel(8.5, 8.5) < 1e-16


def test_tw_known_value():
    # F_2(-2) to 13 digits from high-precision Fredholm evaluations
    assert tracy_widom_cdf(-2.0) == pytest.approx(0.413224142505, abs=1e-11)


def test_tw_two_schemes():
    for s in (-2.0, 0.0, 2.0):
        assert abs(tracy_widom_cdf(s) - tracy_widom_cdf_linear(s, m=50)) <= 1e-7


def test_tw_monotone_and_bounded():
    s = np.linspace(-8, 12, 41)
    F = tracy_widom_cdf(s)
    assert np.all(np.diff(F) >= 0)
    assert F.min() >= 0 and F.max() <= 1
    assert tracy_widom_cdf(8.0) >= 1 - 1e-9


def test_tw_sf_is_complement():
    for s in (-3.0, 0.0, 3.0):
        F, G = tracy_widom_pair(s)
        assert F + G == pytest.approx(1.0, abs=1e-15)
    assert tracy_widom_sf(10.0) > 0


def test_tw_tail_at_six():
    ratio = tracy_widom_sf(6.0) / tw_tail_asymptotic(6.0)
    assert abs(ratio - 1) <= 0.10


def test_tw_tail_ratio_trend():
    r = [tracy_widom_sf(s) / tw_tail_asymptotic(s) for s in (4.0, 6.0, 8.0, 10.0)]
    assert all(a < b < 1 for a, b in zip(r, r[1:]))


def test_tail_asymptotic_formulas():
    assert tw_tail_asymptotic(6.0) == pytest.approx(math.exp(-19.5959) / (16 * math.pi * 14.6969),
                                                    rel=1e-4)
    s = np.linspace(0.5, 12, 30)
    assert np.all(np.diff(tw_tail_asymptotic(s)) < 0)
    assert np.allclose(log_tw_tail_asymptotic(s), -4 / 3 * s**1.5 - np.log(16 * math.pi * s**1.5),
                       rtol=0, atol=1e-13)


def test_tw_out_of_range():
    with pytest.raises(OutOfRange):
        tracy_widom_cdf(-9.0)


def test_airy_operator_spectrum():
    for s in (-8.0, -4.0, 0.0, 3.0):
        y, w = _nystrom_quadratic(s, 120)
        sw = np.sqrt(w)
        lam = np.linalg.eigvalsh(sw[:, None] * airy_kernel_matrix(y) * sw[None, :])
        assert lam.max() < 1 and lam.min() > -1e-12


def test_fredholm_det_small_tail():
    # with every eigenvalue tiny, 1 - det equals the trace to leading order
    A = np.diag([1e-30, 2e-30])
    det, tail = qd.fredholm_det(A)
    assert det == 1.0 and tail == pytest.approx(3e-30, rel=1e-12)
