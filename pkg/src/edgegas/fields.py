"""Confining polynomials Q and Gaussian-mixture interactions h.

Fourier transforms use the unitary convention

    hat h(t) = (2 pi)^(-1/2) * int exp(-i t s) h(s) ds,

under which exp(-t^2/2) is self-dual.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import NonConvex, ValidationError

MAX_DEGREE = 12


@dataclass(frozen=True)
class ConfiningField:
    """Even polynomial Q(x) = sum_k coeffs[k] x^k with positive leading coefficient."""

    coeffs: tuple[float, ...]
    poly: Polynomial = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = np.trim_zeros(np.asarray(self.coeffs, dtype=float), "b")
        if c.size == 0:
            raise ValidationError("Q.coeffs: polynomial is identically zero")
        if c.size - 1 > MAX_DEGREE:
            raise ValidationError(f"Q.coeffs: degree {c.size - 1} exceeds {MAX_DEGREE}")
        if np.any(c[1::2] != 0.0):
            raise ValidationError("Q.coeffs: odd-degree coefficients must be exactly zero")
        if c[-1] <= 0:
            raise ValidationError("Q.coeffs: leading coefficient must be positive")
        if c.size < 3:
            raise ValidationError("Q.coeffs: constant Q is not confining")
        object.__setattr__(self, "coeffs", tuple(float(v) for v in c))
        object.__setattr__(self, "poly", Polynomial(c))

    @classmethod
    def from_config(cls, cfg: dict) -> "ConfiningField":
        try:
            return cls(tuple(cfg["coeffs"]))
        except KeyError:
            raise ValidationError("missing field: Q.coeffs") from None

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return self.poly(x)

    def deriv(self, m: int = 1) -> Polynomial:
        return self.poly.deriv(m)

    def d1(self, x):
        return self.poly.deriv(1)(x)

    def d2(self, x):
        return self.poly.deriv(2)(x)

    def shifted(self, c: float) -> "ConfiningField":
        return ConfiningField((self.coeffs[0] + c,) + self.coeffs[1:])


def alpha_Q(field: ConfiningField, L: float) -> float:
    """Minimum of Q'' over [-L-1, L+1], located through the real roots of Q'''."""
    lo, hi = -L - 1.0, L + 1.0
    q2 = field.deriv(2)
    q3 = field.deriv(3)
    cands = [lo, hi]
    if q3.degree() >= 1:
        r = q3.roots()
        r = r[np.abs(r.imag) < 1e-12].real
        cands.extend(x for x in r if lo <= x <= hi)
    elif q3.degree() == 0 and q3.coef[0] == 0:
        cands.append(0.0)
    value = float(min(q2(x) for x in cands))
    if value <= 0:
        raise NonConvex(f"inf Q'' = {value:g} <= 0 on [{lo:g}, {hi:g}]")
    return value


@dataclass(frozen=True)
class InteractionSpec:
    """h(t) = sum_j c_j exp(-t^2 / (2 sigma_j^2))."""

    terms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        terms = tuple((float(c), float(s)) for c, s in self.terms)
        for c, s in terms:
            if not s > 0 or not np.isfinite(s):
                raise ValidationError(f"h.terms: sigma must be positive, got {s}")
            if not np.isfinite(c):
                raise ValidationError(f"h.terms: amplitude must be finite, got {c}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_config(cls, cfg: dict | None) -> "InteractionSpec":
        if cfg is None:
            return cls()
        try:
            return cls(tuple((t["c"], t["sigma"]) for t in cfg.get("terms", [])))
        except KeyError as exc:
            raise ValidationError(f"missing field: h.terms[].{exc.args[0]}") from None

    @classmethod
    def gaussian(cls, c: float, sigma: float = 1.0) -> "InteractionSpec":
        return cls(((c, sigma),))

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=float)

    @property
    def widths(self) -> np.ndarray:
        return np.array([s for _, s in self.terms], dtype=float)

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for c, _ in self.terms)

    @property
    def positive_definite(self) -> bool:
        return all(c >= 0 for c, _ in self.terms)

    @property
    def negative_definite(self) -> bool:
        return all(c <= 0 for c, _ in self.terms)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, s in self.terms:
            out = out + c * np.exp(-0.5 * (t / s) ** 2)
        return out

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, s in self.terms:
            out = out + c * np.exp(-0.5 * (t / s) ** 2) * (t * t / s**4 - 1.0 / s**2)
        return out

    def fourier(self, t):
        return fourier_h(self, t)

    def scaled(self, factor: float) -> "InteractionSpec":
        return InteractionSpec(tuple((factor * c, s) for c, s in self.terms))

    def sup_minus_d2(self) -> float:
        """sup_t -h''(t), the sufficient convexity threshold for positive-definite h."""
        if self.is_zero:
            return 0.0
        smax = max(s for _, s in self.terms)
        t = np.linspace(0.0, 12.0 * smax, 4001)
        return float(np.max(-self.d2(t)))


def fourier_h(h: InteractionSpec, t):
    """Closed-form transform: sum_j c_j sigma_j exp(-sigma_j^2 t^2 / 2)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for c, s in h.terms:
        out = out + c * s * np.exp(-0.5 * (s * t) ** 2)
    return out


@dataclass(frozen=True)
class SplitInteraction:
    plus: InteractionSpec
    minus: InteractionSpec

    def __call__(self, t):
        return self.plus(t) - self.minus(t)


def split(h: InteractionSpec) -> SplitInteraction:
    """Write h = h_plus - h_minus with both parts positive-definite.

    For Gaussian mixtures the sign of each amplitude is the sign of its
    (strictly positive) transform, so partitioning terms is exact.
    """
    plus = tuple((c, s) for c, s in h.terms if c > 0)
    minus = tuple((-c, s) for c, s in h.terms if c < 0)
    return SplitInteraction(InteractionSpec(plus), InteractionSpec(minus))


def recombine(sp: SplitInteraction) -> InteractionSpec:
    return InteractionSpec(sp.plus.terms + tuple((-c, s) for c, s in sp.minus.terms))


def interaction_from_pairs(pairs: Iterable[Sequence[float]]) -> InteractionSpec:
    return InteractionSpec(tuple((float(c), float(s)) for c, s in pairs))
