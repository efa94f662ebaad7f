"""Moderate and large deviation predictions for the largest particle.

The central object is the tail approximation

    F_{N,V}(t) = b^2 exp(-N eta_V(t/b)) / (4 pi N (t^2 - b^2) eta_V'(t/b)),

which interpolates between the Tracy-Widom tail (t - b ~ N^{-2/3}) and the
large deviation rate eta_V (t - b of order one). Everything is kept in
log-space until the last step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .airy import log_tw_tail_asymptotic, tracy_widom_pair
from .equilibrium import DeviationProfile
from .errors import DomainError

MODERATE_SCALED_MIN = 5.0
MODERATE_RELATIVE_MAX = 0.1


def regime(N: float, t: float, b: float) -> str:
    """Reporting convention only: 'moderate', 'large' or 'edge'."""
    d = t - b
    if d > MODERATE_RELATIVE_MAX * b:
        return "large"
    if N ** (2.0 / 3.0) * d >= MODERATE_SCALED_MIN:
        return "moderate"
    return "edge"


def log_f_nv(profile: DeviationProfile, N: float, t: float) -> float:
    b = profile.b
    d = t - b
    if not d > 0:
        raise DomainError(f"F_NV needs t > b = {b!r}, got t = {t!r}")
    x = t / b
    eta = profile.eta(x)
    deta = float(profile.eta_prime(x))
    return (-N * eta - math.log(4.0 * math.pi * N * d * (t + b) * deta)
            + 2.0 * math.log(b))


def f_nv(profile: DeviationProfile, N: float, t: float) -> float:
    """F_{N,V}(t); underflows to 0.0 quietly, use log_f_nv for the exponent."""
    return math.exp(log_f_nv(profile, N, t))


@dataclass(frozen=True)
class TailPrediction:
    t: float
    N: float
    log_value: float
    regime: str
    moderate_error_scale: float
    large_error_scale: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


def tail_prediction(profile: DeviationProfile, N: float, t: float) -> TailPrediction:
    d = t - profile.b
    lv = log_f_nv(profile, N, t)
    return TailPrediction(t, N, lv, regime(N, t, profile.b),
                          1.0 / (N * d**1.5), math.sqrt(d))


def t_of_s(profile: DeviationProfile, N: float, s: float) -> float:
    return profile.b + s / (profile.c_star * N ** (2.0 / 3.0))


def s_of_t(profile: DeviationProfile, N: float, t: float) -> float:
    return (t - profile.b) * profile.c_star * N ** (2.0 / 3.0)


def tw_comparison(profile: DeviationProfile, N: float, s: float) -> float:
    """F_{N,V}(t(s)) / (1 - F_2(s)); tends to 1 for 1 << s << N^{4/15}."""
    if not s > 0:
        raise DomainError("tw_comparison needs s > 0")
    tail = tracy_widom_pair(s)[1]
    return math.exp(log_f_nv(profile, N, t_of_s(profile, N, s)) - math.log(tail))


def rate_function(profile: DeviationProfile, t: float) -> float:
    """eta_V(t/b), with +inf below the edge."""
    if t < profile.b:
        return math.inf
    return float(profile.eta(t / profile.b))


def moderate_log_check(profile: DeviationProfile, N: float, s: float) -> float:
    """log F_NV(t(s)) / s^{3/2} + 4/3 + log(16 pi s^{3/2}) / s^{3/2}."""
    s32 = s**1.5
    return (log_f_nv(profile, N, t_of_s(profile, N, s)) - float(log_tw_tail_asymptotic(s))) / s32


def recovered_leading_coefficient(profile: DeviationProfile, eps=None, degree: int = 5) -> float:
    """Fit N eta_V(t(s)/b) / s^{3/2} as a polynomial in eps = s N^{-2/3}; return the intercept.

    This recovers the universal 4/3 from eta_V itself, independently of the
    Taylor-coefficient route in cramer_series.
    """
    eps = np.geomspace(1e-3, 3e-2, 24) if eps is None else np.asarray(eps, dtype=float)
    bc = profile.b * profile.c_star
    vals = np.array([profile.eta(1.0 + e / bc) for e in eps]) / eps**1.5
    coef = np.polynomial.polynomial.polyfit(eps, vals, degree)
    return float(coef[0])
