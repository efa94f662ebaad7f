"""Christoffel-Darboux kernels for weights exp(-N V(x) + f(x)) on [-L, L].

Recurrence coefficients come from the Lanczos form of the discretized
Stieltjes procedure. Orthonormal functions are propagated with the weight
already attached and with a running log-scale, so neither polynomial growth
nor exp(-N V / 2) can overflow or underflow before the final product.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import quadrature as qd
from .errors import (DomainError, GridTooCoarse, QuadratureUnstable,
                     Underflow)

MAX_N = 500


@dataclass(frozen=True)
class WeightSpec:
    N: int
    V: Callable
    L: float
    f: Callable | None = None

    def __post_init__(self):
        if self.N < 2:
            raise DomainError("N >= 2 required")
        if self.N > MAX_N:
            raise DomainError(f"N = {self.N} exceeds the stability envelope N <= {MAX_N}")

    def log_weight(self, x):
        x = np.asarray(x, dtype=float)
        out = -self.N * self.V(x)
        if self.f is not None:
            out = out + self.f(x)
        return out

    def perturbed(self, f: Callable | None) -> "WeightSpec":
        return WeightSpec(self.N, self.V, self.L, f)


@dataclass(frozen=True)
class RecurrenceTable:
    """alpha[k] and beta[k] (k < n) of the monic recurrence; beta[0] is the total mass.

    p_{k+1} = (x - alpha_k) p_k - beta_k p_{k-1}. beta has one extra entry,
    beta[n], so that the table also closes the Christoffel-Darboux formula.
    """

    alpha: np.ndarray
    beta: np.ndarray
    log_mu0: float

    @property
    def n(self) -> int:
        return len(self.alpha)


def default_grid_size(n: int) -> int:
    return max(8 * n + 200, 1000)


def _lanczos(x: np.ndarray, logw: np.ndarray, n: int, reorth: bool) -> RecurrenceTable:
    # sqrt(w) is carried instead of w: near the edge w itself underflows
    # (exp(-N V(b)) ~ exp(-800) at N = 400) while sqrt(w) stays representable.
    shift = float(np.max(logw))
    if not np.isfinite(shift):
        raise Underflow("weight vanishes on the whole grid")
    mass = float(np.sum(np.exp(logw - shift)))
    log_mu0 = shift + math.log(mass)
    q = np.exp(0.5 * (logw - log_mu0))
    if not np.any(q > 0):
        raise Underflow("weight vanishes on the whole grid")
    G = len(x)
    Qm = np.empty((n + 1, G)) if reorth else None
    alpha = np.empty(n)
    beta = np.empty(n + 1)
    beta[0] = math.exp(log_mu0) if log_mu0 < 700 else np.inf
    q_prev = np.zeros(G)
    b_prev = 0.0
    for k in range(n):
        if reorth:
            Qm[k] = q
        v = x * q
        alpha[k] = float(np.dot(q, v))
        v -= alpha[k] * q
        v -= b_prev * q_prev
        if reorth:
            for _ in range(2):
                v -= Qm[: k + 1].T @ (Qm[: k + 1] @ v)
        nv = float(np.dot(v, v))
        if not nv > 0:
            raise Underflow(f"Lanczos breakdown at step {k}: grid cannot carry degree {k + 1}")
        beta[k + 1] = nv
        b_prev = math.sqrt(nv)
        q_prev, q = q, v / b_prev
    return RecurrenceTable(alpha, beta, log_mu0)


def recurrence(w: WeightSpec, n: int | None = None, grid_size: int | None = None,
               check: bool = True, reorth: bool = False) -> RecurrenceTable:
    """Recurrence coefficients of w on a Gauss-Legendre grid over [-L, L]."""
    n = w.N if n is None else n
    if not 1 <= n <= w.N:
        raise DomainError("need 1 <= n <= N")
    G = grid_size or default_grid_size(n)
    x, gw = qd.gauss_legendre(G, -w.L, w.L)
    table = _lanczos(x, w.log_weight(x) + np.log(gw), n, reorth)
    if check:
        x2, gw2 = qd.gauss_legendre(2 * G, -w.L, w.L)
        fine = _lanczos(x2, w.log_weight(x2) + np.log(gw2), n, reorth)
        rel = np.max(np.abs(fine.beta[1:] - table.beta[1:]) / fine.beta[1:])
        if rel > 1e-7:
            raise GridTooCoarse(f"doubling the grid moved beta by {rel:.2e}")
        table = fine
    return table


def _orthonormal_values(table: RecurrenceTable, logw: np.ndarray, x: np.ndarray,
                        count: int) -> np.ndarray:
    """q_j(x) = p_j(x) sqrt(w(x)) for j < count, orthonormal p_j."""
    out = np.empty((count, x.size))
    scale = 0.5 * (logw - table.log_mu0)
    m_prev = np.zeros_like(x)
    m_cur = np.ones_like(x)
    out[0] = np.exp(scale)
    b = np.sqrt(table.beta)
    for k in range(count - 1):
        nxt = (x - table.alpha[k]) * m_cur
        if k:
            nxt -= b[k] * m_prev
        m_prev, m_cur = m_cur, nxt / b[k + 1]
        mag = np.maximum(np.abs(m_cur), np.abs(m_prev))
        big = (mag > 1e100) | ((mag < 1e-100) & (mag > 0))
        if big.any():
            r = np.where(big, mag, 1.0)
            m_cur = m_cur / r
            m_prev = m_prev / r
            scale = scale + np.log(r)
        with np.errstate(divide="ignore"):
            out[k + 1] = np.sign(m_cur) * np.exp(np.log(np.abs(m_cur)) + scale)
    return out


@dataclass(frozen=True)
class CDKernel:
    weight: WeightSpec
    table: RecurrenceTable

    @property
    def N(self) -> int:
        return self.weight.N

    @property
    def L(self) -> float:
        return self.weight.L

    def phi(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        return _orthonormal_values(self.table, self.weight.log_weight(x), x, self.N)

    def __call__(self, s, t):
        return kernel_eval(self, s, t)

    def diag(self, t):
        t_arr = np.asarray(t, dtype=float)
        P = self.phi(t_arr)
        out = np.einsum("jk,jk->k", P, P).reshape(t_arr.shape)
        return out if out.ndim else float(out)

    def matrix(self, y) -> np.ndarray:
        P = self.phi(y)
        return P.T @ P

    def rho1(self, t):
        return self.diag(t) / self.N


def cd_kernel(w: WeightSpec, check: bool = True, grid_size: int | None = None) -> CDKernel:
    return CDKernel(w, recurrence(w, check=check, grid_size=grid_size))


def kernel_eval(K: CDKernel, s, t):
    s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    Ps, Pt = K.phi(s), K.phi(t)
    out = np.einsum("jk,jk->k", Ps, Pt).reshape(s.shape)
    return out if out.ndim else float(out)


def correlation(K: CDKernel, points) -> float:
    """rho^k = (N-k)!/N! det[K(t_i, t_j)], the normalized k-point density."""
    pts = np.asarray(points, dtype=float).ravel()
    k = pts.size
    if not 1 <= k <= 6:
        raise DomainError("correlation supports 1 <= k <= 6")
    det = float(np.linalg.det(K.matrix(pts)))
    return det * math.exp(math.lgamma(K.N - k + 1) - math.lgamma(K.N + 1))


def christoffel(K: CDKernel, t):
    """lambda_N(w, t) = w(t) / K_N(t, t) = 1 / sum_j p_j(t)^2."""
    t_arr = np.asarray(t, dtype=float)
    logw = K.weight.log_weight(t_arr)
    with np.errstate(divide="ignore"):
        out = np.exp(logw - np.log(K.diag(t_arr)))
    return out if np.ndim(out) else float(out)


def log_partition(table: RecurrenceTable, N: int) -> float:
    """log of the Hankel determinant D_{N-1}, up to the N! shared by all weights."""
    k = np.arange(1, N)
    return N * table.log_mu0 + float(np.sum((N - k) * np.log(table.beta[1:N])))


def log_partition_ratio(w1: WeightSpec, w2: WeightSpec, grid_size: int | None = None,
                        check: bool = False, return_error: bool = False):
    """log(Z_{w1} / Z_{w2}) from recurrence tables on one shared grid.

    With return_error, the change under grid doubling is reported as an
    error estimate.
    """
    if w1.N != w2.N or w1.L != w2.L:
        raise DomainError("log_partition_ratio needs equal N and L")
    N = w1.N
    G = grid_size or default_grid_size(N)
    t1 = recurrence(w1, grid_size=G, check=check)
    t2 = recurrence(w2, grid_size=G, check=check)
    value = log_partition(t1, N) - log_partition(t2, N)
    if not return_error:
        return value
    f1 = recurrence(w1, grid_size=2 * G, check=False)
    f2 = recurrence(w2, grid_size=2 * G, check=False)
    fine = log_partition(f1, N) - log_partition(f2, N)
    return fine, abs(fine - value)


def _effective_upper(K: CDKernel, t: float, L: float) -> float:
    y = np.linspace(t, L, 401)
    d = K.diag(y)
    keep = np.nonzero(d >= 1e-30 * np.max(d))[0]
    if keep.size == 0:
        return L
    return float(min(L, y[min(keep[-1] + 1, y.size - 1)]))


def gap_pair(K: CDKernel, t: float, L: float | None = None, m: int = 60,
             tol: float = 1e-6, m_max: int = 1920) -> tuple[float, float]:
    """(det(I - K), 1 - det(I - K)) on L^2((t, L)) by Gauss-Legendre Nystrom.

    The node count doubles from m until consecutive values agree within tol
    (and 1 - det within tol relative).
    """
    L = K.L if L is None else L
    if t >= L:
        return 1.0, 0.0
    upper = _effective_upper(K, t, L)
    if upper <= t:
        return 1.0, 0.0

    def nystrom(mm):
        y, w = qd.gauss_legendre(mm, t, upper)
        P = K.phi(y) * np.sqrt(w)[None, :]
        return qd.fredholm_det(P.T @ P)

    prev = nystrom(m)
    while True:
        m *= 2
        cur = nystrom(m)
        if (abs(cur[0] - prev[0]) <= tol
                and abs(cur[1] - prev[1]) <= tol * max(abs(cur[1]), 1e-300 if cur[1] < 1e-6 else 1.0)):
            return cur
        if m >= m_max:
            raise QuadratureUnstable(f"gap probability at t={t}: m={m // 2} vs {m} "
                                     f"differ by {abs(cur[0] - prev[0]):.2e}")
        prev = cur


def gap_probability(K: CDKernel, t: float, L: float | None = None, m: int = 60) -> float:
    """P(x_max <= t) for the determinantal ensemble on [-L, L]."""
    return gap_pair(K, t, L, m)[0]


def edge_rescaled(K: CDKernel, sol, s, t):
    """(N^{2/3} gamma)^{-1} K_N(b + s/(N^{2/3} gamma), b + t/(N^{2/3} gamma))."""
    from .equilibrium import edge_constants

    scale = K.N ** (2.0 / 3.0) * edge_constants(sol)[1]
    s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    return kernel_eval(K, sol.b + s / scale, sol.b + t / scale) / scale


def diag_tail_integral(K: CDKernel, t: float, L: float | None = None) -> float:
    """int_t^L K_N(y, y) dy, adaptive Gauss-Legendre at relative accuracy."""
    L = K.L if L is None else L
    if t >= L:
        return 0.0
    return qd.adaptive_gauss_legendre(K.diag, t, L, tol=1e-10, relative=True)
