"""Stochastic linearization of the pair interaction.

For a negative-definite h the Gaussian field with covariance -h is sampled
through a discretized spectral representation

    f~(t) = sum_k A_k (cos(t s_k) xi_k + sin(t s_k) eta_k),
    A_k = (2/pi)^{1/4} sqrt(-hat h(s_k) w_k),

which is exactly Gaussian with covariance sum_k A_k^2 cos((t-u) s_k). After
centering against mu, E exp(sum_j f(x_j)) = exp(U(x)) holds with U the
degenerate (Hoeffding) part of the pair statistic, so the interacting
ensemble is an average of determinantal ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Chebyshev

from . import quadrature as qd
from .cdkernel import CDKernel, WeightSpec, default_grid_size, log_partition, recurrence
from .equilibrium import EquilibriumSolution
from .errors import (DefinitenessViolation, EffectiveSampleSizeTooSmall,
                     ToleranceExceeded)
from .fields import InteractionSpec, SplitInteraction

DEFAULT_M = 256
_SPECTRAL_CUT = 1e-16


def _spectral_cutoff(h: InteractionSpec) -> float:
    """Smallest S with |hat h(t)| < 1e-16 for t >= S (term by term, conservatively)."""
    n = max(len(h.terms), 1)
    S = 0.0
    for c, s in h.terms:
        amp = abs(c) * s * n
        if amp > _SPECTRAL_CUT:
            S = max(S, math.sqrt(2.0 * math.log(amp / _SPECTRAL_CUT)) / s)
    return S or 1.0


def stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for sample `index` of run `seed`."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


@dataclass(frozen=True)
class SpectralSampler:
    h: InteractionSpec
    sol: EquilibriumSolution
    nodes: np.ndarray
    weights: np.ndarray
    amplitudes: np.ndarray
    S: float
    moments_cos: np.ndarray = field(repr=False)
    moments_sin: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, h: InteractionSpec, sol: EquilibriumSolution, M: int = DEFAULT_M,
              S: float | None = None) -> "SpectralSampler":
        S = _spectral_cutoff(h) if S is None else S
        s, w = qd.gauss_legendre(M, 0.0, S)
        minus_hat = -h.fourier(s)
        if np.any(minus_hat < 0):
            k = int(np.argmin(minus_hat))
            raise DefinitenessViolation(
                f"-hat h({s[k]:.4g}) = {minus_hat[k]:.3e} < 0: -h is not a covariance")
        A = (2.0 / math.pi) ** 0.25 * np.sqrt(minus_hat * w)
        y, wy = sol.quadrature()
        C = np.cos(np.outer(s, y)) @ wy
        Sn = np.sin(np.outer(s, y)) @ wy
        return cls(h, sol, s, w, A, S, C, Sn)

    @property
    def M(self) -> int:
        return len(self.nodes)

    @property
    def variance(self) -> float:
        """Variance of f~(t) at any t; equals -h(0) up to the spectral quadrature."""
        return float(np.sum(self.amplitudes**2))

    def covariance(self, t):
        t = np.asarray(t, dtype=float)
        return np.cos(np.multiply.outer(t, self.nodes)) @ self.amplitudes**2


@dataclass(frozen=True)
class FieldSample:
    sampler: SpectralSampler
    xi: np.ndarray
    eta: np.ndarray

    def tilde(self, t):
        t = np.asarray(t, dtype=float)
        arg = np.multiply.outer(t, self.sampler.nodes)
        A = self.sampler.amplitudes
        return np.cos(arg) @ (A * self.xi) + np.sin(arg) @ (A * self.eta)

    @property
    def centering(self) -> float:
        """m = int f~ dmu, through the exact moments of mu at the spectral nodes."""
        A = self.sampler.amplitudes
        return float(np.dot(A * self.xi, self.sampler.moments_cos)
                     + np.dot(A * self.eta, self.sampler.moments_sin))

    def __call__(self, t):
        return self.tilde(t) - self.centering

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        s = self.sampler.nodes
        arg = np.multiply.outer(t, s)
        A = self.sampler.amplitudes
        return np.cos(arg) @ (A * s * self.eta) - np.sin(arg) @ (A * s * self.xi)

    def sup_norm(self, L: float, n: int = 2001) -> float:
        return float(np.max(np.abs(self(np.linspace(-L, L, n)))))


def sample_field(sampler: SpectralSampler, rng: np.random.Generator) -> FieldSample:
    z = rng.standard_normal((2, sampler.M))
    return FieldSample(sampler, z[0], z[1])


def field_sample(sampler: SpectralSampler, seed: int, index: int) -> FieldSample:
    return sample_field(sampler, stream(seed, index))


class HoeffdingStatistic:
    """h together with h_mu (Chebyshev interpolant on [-L, L]) and h_mumu."""

    def __init__(self, h: InteractionSpec, sol: EquilibriumSolution, L: float | None = None,
                 tol: float = 1e-13):
        self.h = h
        self.sol = sol
        self.L = float(sol.V.L if L is None else L)
        self._y, self._wy = sol.quadrature()
        self.h_mu = self._interpolate(tol)
        self.h_mumu = float(np.dot(self._wy, self.h_mu(self._y)))

    def h_mu_direct(self, t):
        t = np.asarray(t, dtype=float)
        return self.h(np.subtract.outer(t, self._y)) @ self._wy

    def _interpolate(self, tol: float) -> Callable:
        if self.h.is_zero:
            return lambda t: np.zeros_like(np.asarray(t, dtype=float))
        check = np.linspace(-self.L, self.L, 301)
        exact = self.h_mu_direct(check)
        scale = max(1.0, float(np.max(np.abs(exact))))
        for deg in (32, 64, 128, 256, 512):
            cheb = Chebyshev.interpolate(self.h_mu_direct, deg, domain=[-self.L, self.L])
            if np.max(np.abs(cheb(check) - exact)) <= tol * scale:
                return cheb
        # fall back to the direct quadrature, which is exact but slower
        return self.h_mu_direct


def _pair_sum(hfun, hmu, hmumu, x) -> float:
    x = np.asarray(x, dtype=float)
    N = x.size
    pairs = float(np.sum(hfun(np.subtract.outer(x, x))))
    return pairs - 2.0 * N * float(np.sum(hmu(x))) + N * N * hmumu


def hoeffding_U(x, stat: HoeffdingStatistic) -> float:
    """U(x) = -1/2 sum_{i,j} [h(x_i-x_j) - h_mu(x_i) - h_mu(x_j) + h_mumu]."""
    return -0.5 * _pair_sum(stat.h, stat.h_mu, stat.h_mumu, x)


def _char_function(sol: EquilibriumSolution, t):
    y, w = sol.quadrature()
    arg = np.multiply.outer(np.asarray(t, dtype=float), y)
    return np.cos(arg) @ w, np.sin(arg) @ w


def _char_interpolant(stat: HoeffdingStatistic, S: float):
    """Chebyshev interpolants of Re/Im phi_mu on [0, S], cached on the statistic."""
    cache = stat.__dict__.setdefault("_phi_cache", {})
    if S not in cache:
        re = Chebyshev.interpolate(lambda t: _char_function(stat.sol, t)[0], 128, domain=[0.0, S])
        im = Chebyshev.interpolate(lambda t: _char_function(stat.sol, t)[1], 128, domain=[0.0, S])
        tt = np.linspace(0.0, S, 257)
        r0, i0 = _char_function(stat.sol, tt)
        if max(np.max(np.abs(re(tt) - r0)), np.max(np.abs(im(tt) - i0))) > 1e-13:
            re = lambda t: _char_function(stat.sol, t)[0]  # noqa: E731
            im = lambda t: _char_function(stat.sol, t)[1]  # noqa: E731
        cache[S] = (re, im)
    return cache[S]


def fourier_U(x, stat: HoeffdingStatistic, tol: float = 1e-12) -> float:
    """U(x) = -(2 pi)^{-1/2} int_0^inf |sum_j e^{itx_j} - N phi_mu(t)|^2 hat h(t) dt."""
    if stat.h.is_zero:
        return 0.0
    x = np.asarray(x, dtype=float)
    N = x.size
    S = _spectral_cutoff(stat.h)
    phi_re, phi_im = _char_interpolant(stat, S)

    def integrand(t):
        arg = np.multiply.outer(t, x)
        c = np.cos(arg).sum(axis=1) - N * phi_re(t)
        s = np.sin(arg).sum(axis=1) - N * phi_im(t)
        return (c * c + s * s) * stat.h.fourier(t)

    val = qd.adaptive_gauss_legendre(integrand, 0.0, S, tol=tol)
    return -val / math.sqrt(2.0 * math.pi)


def u_z(x, z: float, sp: SplitInteraction, sol: EquilibriumSolution) -> float:
    """U_z = (z/2) S_+ + (1/2) S_-; U_{-1} is U for h = h_+ - h_-."""
    out = 0.0
    for part, coef in ((sp.plus, 0.5 * z), (sp.minus, 0.5)):
        if part.is_zero:
            continue
        st = HoeffdingStatistic(part, sol)
        out += coef * _pair_sum(st.h, st.h_mu, st.h_mumu, x)
    return out


def discrete_variance(x, sampler: SpectralSampler) -> float:
    """Exact Var(sum_j f(x_j)) under the discretized field (no sampling)."""
    x = np.asarray(x, dtype=float)
    N = x.size
    arg = np.multiply.outer(sampler.nodes, x)
    c = np.cos(arg).sum(axis=1) - N * sampler.moments_cos
    s = np.sin(arg).sum(axis=1) - N * sampler.moments_sin
    return float(np.sum(sampler.amplitudes**2 * (c * c + s * s)))


@dataclass(frozen=True)
class LinearizationReport:
    variance: float
    two_U: float
    tolerance: float
    mc_mean: float
    mc_se: float
    exp_U: float

    @property
    def error(self) -> float:
        return abs(self.variance - self.two_U)

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance

    @property
    def mc_z(self) -> float:
        return (self.mc_mean - self.exp_U) / self.mc_se if self.mc_se > 0 else 0.0


def linearization_check(x, sampler: SpectralSampler, tol: float = 1e-6, n_mc: int = 0,
                        seed: int = 0, strict: bool = True) -> LinearizationReport:
    """Var(sum f(x_j)) against 2 U(x); optionally E exp(sum f) against exp(U) by MC."""
    x = np.asarray(x, dtype=float)
    stat = HoeffdingStatistic(sampler.h, sampler.sol)
    U = hoeffding_U(x, stat)
    var = discrete_variance(x, sampler)
    mean = se = float("nan")
    if n_mc:
        rng = stream(seed, 0)
        A = sampler.amplitudes
        arg = np.multiply.outer(sampler.nodes, x)
        c = np.cos(arg).sum(axis=1) - x.size * sampler.moments_cos
        s = np.sin(arg).sum(axis=1) - x.size * sampler.moments_sin
        vals = np.empty(n_mc)
        for lo in range(0, n_mc, 10000):
            k = min(10000, n_mc - lo)
            z = rng.standard_normal((k, 2, sampler.M))
            vals[lo: lo + k] = np.exp(z[:, 0] @ (A * c) + z[:, 1] @ (A * s))
        mean = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / math.sqrt(n_mc))
    rep = LinearizationReport(var, 2.0 * U, tol, mean, se, math.exp(U))
    if strict and not rep.passed:
        raise ToleranceExceeded(f"|Var - 2U| = {rep.error:.3e} > {tol:g}")
    return rep


@dataclass(frozen=True)
class AveragingResult:
    estimate: float
    standard_error: float
    ess: float
    log_weights: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def mean_weight(self) -> float:
        return float(np.mean(np.exp(self.log_weights)))


def self_normalized(log_weights, values) -> tuple[float, float, float]:
    """(estimate, jackknife SE, ESS) of sum w v / sum w; order-independent (fsum)."""
    logw = np.asarray(log_weights, dtype=float)
    v = np.asarray(values, dtype=float)
    w = np.exp(logw - np.max(logw))
    M = w.size
    sw = math.fsum(w)
    swv = math.fsum(w * v)
    ess = sw * sw / math.fsum(w * w)
    loo = (swv - w * v) / (sw - w)
    mean_loo = math.fsum(loo) / M
    se = math.sqrt((M - 1) / M * math.fsum((loo - mean_loo) ** 2))
    return swv / sw, se, ess


def average_determinantal(statistic: Callable[[CDKernel], float], sampler: SpectralSampler,
                          M: int, N: int, V, L: float, seed: int = 0,
                          grid_size: int | None = None, min_ess_fraction: float = 0.1,
                          ) -> AveragingResult:
    """Self-normalized average of statistic(K_f) over M field samples.

    Each sample f gives the determinantal ensemble with weight exp(-N V + f);
    its importance weight is Z_f / Z_0 from the recurrence tables (Hankel
    products), evaluated on one shared grid.
    """
    base = WeightSpec(N, V, L)
    G = grid_size or default_grid_size(N)
    log_z0 = log_partition(recurrence(base, grid_size=G, check=False), N)
    logw = np.empty(M)
    vals = np.empty(M)
    for i in range(M):
        f = field_sample(sampler, seed, i)
        w = base.perturbed(f)
        table = recurrence(w, grid_size=G, check=False)
        logw[i] = log_partition(table, N) - log_z0
        vals[i] = statistic(CDKernel(w, table))
    est, se, ess = self_normalized(logw, vals)
    if ess < min_ess_fraction * M:
        raise EffectiveSampleSizeTooSmall(
            f"ESS {ess:.1f} < {min_ess_fraction:g} M = {min_ess_fraction * M:g}")
    return AveragingResult(est, se, ess, logw, vals)


def bin_density(K: CDKernel, center: float = 0.0, delta: float = 0.05, n: int = 24) -> float:
    """(1 / 2 delta) int_{center-delta}^{center+delta} rho^1, the bin-averaged one-point density."""
    y, w = qd.gauss_legendre(n, center - delta, center + delta)
    return float(np.dot(w, K.rho1(y))) / (2.0 * delta)
