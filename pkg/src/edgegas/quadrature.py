"""Quadrature rules and Fredholm determinants shared across modules."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .errors import QuadratureFailure


@lru_cache(maxsize=64)
def _legendre(n: int):
    # numpy's eigenvalue route is cubic in n; scipy's is much faster for big grids
    if n <= 512:
        x, w = np.polynomial.legendre.leggauss(n)
    else:
        x, w = roots_legendre(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0):
    x, w = _legendre(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def gauss_chebyshev1(n: int):
    """Nodes/weights for int_{-1}^{1} g(s) / sqrt(1 - s^2) ds."""
    k = np.arange(1, n + 1)
    s = np.cos((2 * k - 1) * np.pi / (2 * n))
    return s, np.full(n, np.pi / n)


def gauss_chebyshev2(n: int):
    """Nodes/weights for int_{-1}^{1} g(s) sqrt(1 - s^2) ds."""
    k = np.arange(1, n + 1)
    theta = k * np.pi / (n + 1)
    return np.cos(theta), np.pi / (n + 1) * np.sin(theta) ** 2


def adaptive_gauss_legendre(f, a: float, b: float, tol: float = 1e-13,
                            n: int = 24, max_depth: int = 40,
                            relative: bool = False) -> float:
    """Adaptive bisection on Gauss-Legendre panels; f must accept arrays.

    A panel is accepted once its n-point value matches the sum over its
    two halves to within tol * max(1, |total|), or tol * |total| when
    relative is set (for integrals that are themselves tiny).
    """
    if a == b:
        return 0.0

    def panel(lo, hi):
        x, w = gauss_legendre(n, lo, hi)
        return float(np.dot(w, f(x)))

    total = panel(a, b)
    scale = (abs(total) or 1e-300) if relative else max(1.0, abs(total))
    stack = [(a, b, total, 0)]
    result = 0.0
    while stack:
        lo, hi, whole, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = panel(lo, mid), panel(mid, hi)
        if abs(left + right - whole) <= tol * scale:
            result += left + right
        elif depth >= max_depth:
            raise QuadratureFailure(f"adaptive Gauss-Legendre did not settle on [{lo}, {hi}]")
        else:
            stack.append((lo, mid, left, depth + 1))
            stack.append((mid, hi, right, depth + 1))
    return result


def fredholm_det(matrix: np.ndarray):
    """det(I - A) and 1 - det(I - A) for a symmetric Nystrom matrix A.

    Both come from the eigenvalues of A so that 1 - det keeps full relative
    accuracy when every eigenvalue is tiny.
    """
    lam = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    lam = np.clip(lam, None, 1.0)
    with np.errstate(divide="ignore"):
        logdet = float(np.sum(np.log1p(-lam)))
    return float(np.exp(logdet)), float(-np.expm1(logdet))
