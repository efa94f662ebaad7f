"""Equilibrium measures of convex fields and the self-consistent field V = Q + h_mu.

The support [a, b] solves

    int_a^b V'(t) / sqrt((b-t)(t-a)) dt = 0,
    int_a^b t V'(t) / sqrt((b-t)(t-a)) dt = 2 pi,

and with lam(t) = (b-a)/2 t + (a+b)/2 the density is

    2 / ((b-a)^2 pi) * sqrt((t-a)(b-t)) * G(lam^{-1}(t)),
    G(t) = 1/pi int_{-1}^{1} int_0^1 (V o lam)''(t + u(s-t)) / sqrt(1-s^2) du ds.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.special import binom

from . import quadrature as qd
from .errors import (DomainError, EndpointsOutsideDomain, NoConvergence,
                     QuadratureFailure, SeriesInstability)
from .fields import ConfiningField, InteractionSpec, alpha_Q

log = logging.getLogger(__name__)

N_ENDPOINT_NODES = 256
N_MEASURE_NODES = 256


def _even_chebyshev(func: Callable, L: float, degree: int) -> Chebyshev:
    cheb = Chebyshev.interpolate(func, degree, domain=[-L, L])
    coef = cheb.coef.copy()
    coef[1::2] = 0.0
    return Chebyshev(coef, domain=[-L, L])


@dataclass(frozen=True)
class SmoothField:
    """V = Q + correction on [-L, L]; the correction is an even Chebyshev interpolant."""

    Q: ConfiningField
    L: float
    correction: Chebyshev | None = None
    degree: int = 128
    is_even: bool = field(default=True, init=False)

    def __post_init__(self):
        c = self.correction
        object.__setattr__(self, "_c1", None if c is None else c.deriv(1))
        object.__setattr__(self, "_c2", None if c is None else c.deriv(2))
        object.__setattr__(self, "_q1", self.Q.deriv(1))
        object.__setattr__(self, "_q2", self.Q.deriv(2))

    @classmethod
    def from_correction(cls, Q: ConfiningField, L: float, func: Callable,
                        degree: int = 128) -> "SmoothField":
        return cls(Q, L, _even_chebyshev(func, L, degree), degree)

    def value(self, x):
        out = self.Q(x)
        if self.correction is not None:
            out = out + self.correction(x)
        return out

    __call__ = value

    def d1(self, x):
        out = self._q1(x)
        if self._c1 is not None:
            out = out + self._c1(x)
        return out

    def d2(self, x):
        out = self._q2(x)
        if self._c2 is not None:
            out = out + self._c2(x)
        return out

    def blend(self, other: "SmoothField", weight: float) -> "SmoothField":
        """weight * self + (1 - weight) * other, for fields sharing Q and L."""
        if self.correction is None or other.correction is None:
            raise ValueError("blend needs two corrected fields")
        coef = weight * self.correction.coef + (1 - weight) * other.correction.coef
        return SmoothField(self.Q, self.L, Chebyshev(coef, domain=[-self.L, self.L]),
                           self.degree)

    def interpolation_residual(self, func: Callable, n_check: int = 97) -> float:
        """Sup error of the correction against func at off-grid points."""
        if self.correction is None:
            return 0.0
        x = np.linspace(-self.L, self.L, n_check) * (1 - 1e-3) + 1e-4
        return float(np.max(np.abs(self.correction(x) - func(x))))


def _endpoint_sums(V, c: float, r: float, n: int):
    s, w = qd.gauss_chebyshev1(n)
    x = c + r * s
    v1 = V.d1(x)
    return w, s, x, v1


def endpoint_residuals(V, a: float, b: float, n: int = N_ENDPOINT_NODES):
    """The two endpoint equations evaluated by Gauss-Chebyshev quadrature."""
    c, r = 0.5 * (a + b), 0.5 * (b - a)
    w, s, x, v1 = _endpoint_sums(V, c, r, n)
    return float(np.dot(w, v1)), float(np.dot(w, x * v1) - 2 * np.pi)


def _solve_even(V, n: int, tol: float, maxiter: int) -> float:
    s, w = qd.gauss_chebyshev1(n)

    def F(b):
        return float(np.dot(w, b * s * V.d1(b * s))) - 2 * np.pi

    def dF(b):
        x = b * s
        return float(np.dot(w, s * V.d1(x) + b * s * s * V.d2(x)))

    lo, hi = 0.0, 1.0
    while F(hi) < 0:
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise NoConvergence("could not bracket the endpoint b")
    b = hi
    for _ in range(maxiter):
        fb = F(b)
        if abs(fb) <= tol:
            return b
        if fb > 0:
            hi = b
        else:
            lo = b
        d = dF(b)
        step = b - fb / d if d > 0 else 0.5 * (lo + hi)
        b = step if lo < step < hi else 0.5 * (lo + hi)
    raise NoConvergence(f"endpoint Newton iteration stalled, residual {F(b):.3e}")


def _solve_general(V, n: int, tol: float, maxiter: int):
    s, w = qd.gauss_chebyshev1(n)

    def resid(c, r):
        x = c + r * s
        v1 = V.d1(x)
        return np.array([np.dot(w, v1), np.dot(w, x * v1) - 2 * np.pi])

    c, r = 0.0, 1.0
    while resid(c, r)[1] < -np.pi and r < 1e6:
        r *= 2
    for _ in range(maxiter):
        F = resid(c, r)
        if np.max(np.abs(F)) <= tol:
            return c - r, c + r
        x = c + r * s
        v1, v2 = V.d1(x), V.d2(x)
        J = np.array([
            [np.dot(w, v2), np.dot(w, s * v2)],
            [np.dot(w, v1 + x * v2), np.dot(w, s * (v1 + x * v2))],
        ])
        dc, dr = np.linalg.solve(J, -F)
        lam = 1.0
        norm0 = np.linalg.norm(F)
        while lam > 1e-8:
            cn, rn = c + lam * dc, r + lam * dr
            if rn > 0 and np.linalg.norm(resid(cn, rn)) < norm0:
                break
            lam *= 0.5
        c, r = cn, rn
    raise NoConvergence("two-endpoint Newton iteration did not converge in "
                        f"{maxiter} steps")


def solve_endpoints(V, n: int = N_ENDPOINT_NODES, tol: float = 1e-13,
                    maxiter: int = 100) -> tuple[float, float]:
    """Support endpoints (a, b); even fields only solve for b."""
    if getattr(V, "is_even", False):
        b = _solve_even(V, n, tol, maxiter)
        a = -b
    else:
        a, b = _solve_general(V, n, tol, maxiter)
    L = getattr(V, "L", np.inf)
    if not (-L < a < b < L):
        raise EndpointsOutsideDomain(f"support [{a:.6g}, {b:.6g}] not inside (-{L}, {L})")
    return float(a), float(b)


def _G_values(V, a, b, t, ns, nu):
    c, r = 0.5 * (a + b), 0.5 * (b - a)
    s, ws = qd.gauss_chebyshev1(ns)
    u, wu = qd.gauss_legendre(nu, 0.0, 1.0)
    t = np.asarray(t, dtype=float)
    y = t[:, None, None] + u[None, None, :] * (s[None, :, None] - t[:, None, None])
    W2 = r * r * V.d2(c + r * y)
    return np.einsum("tsu,s,u->t", W2, ws, wu) / np.pi


def compute_G(V, a: float, b: float, ns: int = 32, nu: int = 16,
              degree: int = 64, tol: float = 1e-8) -> Chebyshev:
    """Chebyshev interpolant of G over every t with lam(t) inside [-L, L]."""
    c, r = 0.5 * (a + b), 0.5 * (b - a)
    L = getattr(V, "L", max(abs(a), abs(b)) * 1.5)
    lo, hi = (-L - c) / r, (L - c) / r
    k = np.arange(degree + 1)
    nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * (k + 0.5) / (degree + 1))
    vals = _G_values(V, a, b, nodes, ns, nu)
    fine = _G_values(V, a, b, nodes, 2 * ns, 2 * nu)
    err = np.max(np.abs(vals - fine) / np.maximum(1.0, np.abs(fine)))
    if err > tol:
        raise QuadratureFailure(f"G quadrature refinement disagreement {err:.2e}")
    return Chebyshev.fit(nodes, fine, degree, domain=[lo, hi])


@dataclass(frozen=True)
class EquilibriumSolution:
    a: float
    b: float
    G: Chebyshev
    V: object

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.b - self.a)

    def lam(self, t):
        return self.half_width * np.asarray(t) + self.center

    def lam_inv(self, x):
        if self.a == -self.b:
            return np.asarray(x) / self.b
        return (np.asarray(x) - self.center) / self.half_width

    def G_at(self, t):
        return self.G(t)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t > self.a) & (t < self.b)
        tt = np.where(inside, t, self.center)
        val = (2.0 / ((self.b - self.a) ** 2 * np.pi)
               * np.sqrt((tt - self.a) * (self.b - tt)) * self.G(self.lam_inv(tt)))
        out = np.where(inside, val, 0.0)
        return out if out.ndim else float(out)

    def quadrature(self, n: int = N_MEASURE_NODES):
        """Nodes and weights integrating against the equilibrium measure."""
        x, w = qd.gauss_chebyshev2(n)
        return self.lam(x), w * self.G(x) / (2 * np.pi)

    def mass(self, n: int = N_MEASURE_NODES) -> float:
        return float(np.sum(self.quadrature(n)[1]))

    def endpoint_residuals(self):
        return endpoint_residuals(self.V, self.a, self.b)

    @property
    def c_star(self) -> float:
        return edge_constants(self)[0]

    @property
    def gamma(self) -> float:
        return edge_constants(self)[1]


def density(sol: EquilibriumSolution, t):
    return sol.density(t)


def edge_constants(sol: EquilibriumSolution) -> tuple[float, float]:
    """(c*, gamma_V); they coincide whenever a = -b."""
    g1 = float(sol.G(1.0))
    c_star = 2.0 ** (-1.0 / 3.0) * g1 ** (2.0 / 3.0) / sol.b
    gamma = (2.0 * g1) ** (2.0 / 3.0) / (sol.b - sol.a)
    return c_star, gamma


def equilibrium_measure(V, **kw) -> EquilibriumSolution:
    a, b = solve_endpoints(V)
    G = compute_G(V, a, b, **kw)
    grid = np.cos(np.linspace(0, np.pi, 401))
    if np.min(G(grid)) <= 0:
        raise QuadratureFailure("G_V is not positive on [-1, 1]; field not convex enough")
    return EquilibriumSolution(a, b, G, V)


def default_L(Q: ConfiningField, margin: float = 1.5) -> float:
    """Box half-width: support of mu_Q plus margin, rounded up to 0.5."""
    b = _solve_even(SmoothField(Q, np.inf), N_ENDPOINT_NODES, 1e-13, 100)
    return math.ceil((b + margin) * 2) / 2


def h_mu_function(h: InteractionSpec, sol: EquilibriumSolution, n: int = N_MEASURE_NODES):
    nodes, weights = sol.quadrature(n)

    def h_mu(t):
        t = np.asarray(t, dtype=float)
        return h(t[..., None] - nodes) @ weights

    return h_mu


@dataclass
class FixedPointResult:
    solution: EquilibriumSolution
    V: SmoothField
    iterations: int
    residual: float
    history: list = field(default_factory=list)


def fixed_point(Q: ConfiningField, h: InteractionSpec, L: float | None = None,
                degree: int = 128, tol: float = 1e-10, max_iter: int = 200,
                damping_after: int = 50, damping: float = 0.5,
                init: SmoothField | None = None) -> FixedPointResult:
    """Solve mu = equilibrium measure of Q + h_mu by (eventually damped) iteration."""
    if L is None:
        L = default_L(Q)
    if h.is_zero:
        V = SmoothField(Q, L, degree=degree)
        return FixedPointResult(equilibrium_measure(V), V, 1, 0.0)
    alpha_Q(Q, L)

    V = init if init is not None else SmoothField(Q, L, degree=degree)
    sol = equilibrium_measure(V)
    grid = np.linspace(-L, L, 801)
    rho_old = sol.density(grid)
    history = []
    for it in range(1, max_iter + 1):
        V_new = SmoothField.from_correction(Q, L, h_mu_function(h, sol), degree)
        if it > damping_after and V.correction is not None:
            V_new = V_new.blend(V, damping)
        V = V_new
        sol_new = equilibrium_measure(V)
        rho = sol_new.density(grid)
        change = max(float(np.max(np.abs(rho - rho_old))), abs(sol_new.b - sol.b))
        history.append(change)
        log.debug("fixed point iteration %d: change %.3e, b = %.15f", it, change, sol_new.b)
        sol, rho_old = sol_new, rho
        if change <= tol:
            hmu = h_mu_function(h, sol)
            resid = float(np.max(np.abs(V(grid) - Q(grid) - hmu(grid))))
            if resid > 1e-9:
                raise NoConvergence(f"self-consistency residual {resid:.2e} > 1e-9")
            return FixedPointResult(sol, V, it, resid, history)
    raise NoConvergence(f"fixed point not reached in {max_iter} iterations "
                        f"(last change {history[-1]:.2e})")


@dataclass(frozen=True)
class DeviationProfile:
    """Upper-tail data of an even field: eta_V, its derivative, and (b, c*)."""

    solution: EquilibriumSolution
    b: float
    c_star: float

    @classmethod
    def from_solution(cls, sol: EquilibriumSolution) -> "DeviationProfile":
        if abs(sol.a + sol.b) > 1e-12 * sol.b:
            raise DomainError("deviation profile needs a symmetric support a = -b")
        return cls(sol, sol.b, edge_constants(sol)[0])

    @property
    def x_max(self) -> float:
        return float(self.solution.G.domain[1])

    def G(self, x):
        return self.solution.G(x)

    def eta(self, x):
        return eta(self, x)

    def eta_prime(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.maximum(x * x - 1.0, 0.0)) * self.G(x)

    def cramer_coefficients(self, J: int = 3):
        return cramer_coefficients(self, J)

    def cramer_series(self, J: int = 3):
        return cramer_series(self, J)


def eta(profile: DeviationProfile, x):
    """eta_V(x) = int_1^x sqrt(s^2-1) G(s) ds, with s = 1 + u^2 removing the root."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 1.0):
        raise DomainError("eta_V is defined for x >= 1")
    if np.any(xs > profile.x_max * (1 + 1e-12)):
        raise DomainError(f"eta_V needs x <= L / b = {profile.x_max:.6g} (G_V is not known beyond)")
    G = profile.solution.G

    def integrand(u):
        return 2.0 * u * u * np.sqrt(u * u + 2.0) * G(1.0 + u * u)

    out = np.array([qd.adaptive_gauss_legendre(integrand, 0.0, math.sqrt(v - 1.0),
                                              tol=1e-13, relative=True)
                    if v > 1.0 else 0.0 for v in xs])
    return out if np.ndim(x) else float(out[0])


def cramer_series(profile: DeviationProfile, J: int = 3, check: bool = True):
    """(d_0, d_1, ..., d_J) of N eta_V(t(s)/b) = sum_j d_j s^{j+3/2} N^{-2j/3}.

    Uses the Taylor series of sqrt(u+2) G(1+u) at u = 0; d_0 must be 4/3.
    """
    if J > 6:
        raise ValueError("J <= 6")
    G = profile.solution.G
    gk = np.array([G.deriv(k)(1.0) / math.factorial(k) if k else G(1.0)
                   for k in range(J + 1)])
    root2 = np.array([math.sqrt(2.0) * binom(0.5, k) * 0.5**k for k in range(J + 1)])
    g = np.convolve(root2, gk)[: J + 1]
    bc = profile.b * profile.c_star
    k = np.arange(J + 1)
    d = g / ((k + 1.5) * bc ** (k + 1.5))
    if check and abs(d[0] - 4.0 / 3.0) > 1e-6:
        raise SeriesInstability(f"leading Cramer coefficient {d[0]!r} != 4/3")
    return d


def cramer_coefficients(profile: DeviationProfile, J: int = 3):
    """Cramer coefficients d_1..d_J (the leading 4/3 is checked, not returned)."""
    return cramer_series(profile, J)[1:]
