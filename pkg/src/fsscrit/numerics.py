"""Shared numerical kernels: quadrature, Laguerre polynomials, shape functions
and generalized symmetric eigensolvers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.linalg.lapack import dpbtrf, dpbtrs
from scipy.special import roots_laguerre

from .errors import DecompositionError, NumericalError, ParameterError

__all__ = [
    "QuadratureRule",
    "gauss_legendre",
    "gauss_laguerre",
    "laguerre_L2",
    "laguerre_L2_table",
    "ShapeFunctionSet",
    "shape_functions",
    "EigenSolution",
    "solve_generalized_symmetric",
    "GroundPoint",
    "dense_to_banded",
    "banded_to_dense",
    "banded_matvec",
    "lowest_banded_generalized",
]


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def _legendre_and_derivative(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    if n == 0:
        return p0, np.zeros_like(x)
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


@lru_cache(maxsize=64)
def _reference_gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_derivative(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    p, dp = _legendre_and_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return x[order], w[order]


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [a, b], exact to degree 2n-1.

    Nodes are Newton-polished roots of P_n starting from the usual
    cosine asymptotic guess.
    """
    if n < 1:
        raise ParameterError(f"need n >= 1, got {n}")
    if not a < b:
        raise ParameterError(f"need a < b, got [{a}, {b}]")
    if n == 1:
        x, w = np.array([0.0]), np.array([2.0])
    else:
        x, w = _reference_gauss_legendre(n)
    half = 0.5 * (b - a)
    return QuadratureRule(
        nodes=a + half * (x + 1.0), weights=half * w, degree=2 * n - 1
    )


@lru_cache(maxsize=16)
def gauss_laguerre(n: int) -> QuadratureRule:
    """Gauss-Laguerre rule for ∫_0^∞ e^{-x} f(x) dx (weight excluded from f)."""
    if n < 1:
        raise ParameterError(f"need n >= 1, got {n}")
    x, w = roots_laguerre(n)
    return QuadratureRule(nodes=x, weights=w, degree=2 * n - 1)


# ---------------------------------------------------------------------------
# Laguerre polynomials of order 2
# ---------------------------------------------------------------------------


def laguerre_L2_table(nmax: int, r) -> np.ndarray:
    """Rows L_0^(2)(r) .. L_nmax^(2)(r) by forward recurrence.

    Returns an array of shape ``(nmax + 1,) + shape(r)``.
    """
    if nmax < 0:
        raise ParameterError(f"need nmax >= 0, got {nmax}")
    r = np.asarray(r, dtype=float)
    out = np.empty((nmax + 1,) + r.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = 3.0 - r
    for n in range(1, nmax):
        out[n + 1] = ((2 * n + 3 - r) * out[n] - (n + 2) * out[n - 1]) / (n + 1)
    return out


def laguerre_L2(n: int, r):
    """Generalized Laguerre polynomial L_n^(2) evaluated at r."""
    if n < 0:
        raise ParameterError(f"Laguerre degree must be >= 0, got {n}")
    val = laguerre_L2_table(n, r)[n]
    return float(val) if val.ndim == 0 else val


# ---------------------------------------------------------------------------
# Shape functions on the unit reference element
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1)
def _hermite_quintic_coefficients() -> np.ndarray:
    # Row k of the system: one nodal condition applied to the monomial basis 1..ξ^5.
    conditions = np.zeros((6, 6))
    conditions[0, 0] = 1.0  # p(0)
    conditions[1, 1] = 1.0  # p'(0)
    conditions[2, 2] = 2.0  # p''(0)
    for k in range(6):
        conditions[3, k] = 1.0  # p(1)
        conditions[4, k] = k  # p'(1)
        conditions[5, k] = k * (k - 1)  # p''(1)
    coeffs = np.linalg.solve(conditions, np.eye(6))
    coeffs.setflags(write=False)
    return coeffs  # column j holds the monomial coefficients of shape j


@dataclass(frozen=True)
class ShapeFunctionSet:
    """Local shape functions on ξ ∈ [0, 1].

    For ``hermite-quintic`` the six functions are ordered
    (φ1, φ̄1, φ̿1, φ2, φ̄2, φ̿2): value, slope and curvature at the left node,
    then the same at the right node.
    """

    order: str

    @property
    def count(self) -> int:
        return 2 if self.order == "linear" else 6

    @property
    def dofs_per_node(self) -> int:
        return 1 if self.order == "linear" else 3

    def evaluate(self, xi, derivatives: int = 0) -> np.ndarray:
        """Values (derivatives=0) or ξ-derivatives of all shapes at ``xi``.

        Shape ``(count,) + shape(xi)``.
        """
        xi = np.asarray(xi, dtype=float)
        if self.order == "linear":
            if derivatives == 0:
                return np.stack([1.0 - xi, xi])
            if derivatives == 1:
                return np.stack([-np.ones_like(xi), np.ones_like(xi)])
            return np.zeros((2,) + xi.shape)
        coeffs = _hermite_quintic_coefficients()
        mono = np.zeros((6,) + xi.shape)
        for k in range(derivatives, 6):
            falling = np.prod(np.arange(k - derivatives + 1, k + 1))
            mono[k] = falling * xi ** (k - derivatives)
        return np.tensordot(coeffs.T, mono, axes=1)


def shape_functions(order: str) -> ShapeFunctionSet:
    if order not in ("linear", "hermite-quintic"):
        raise ParameterError(f"unknown shape order {order!r}")
    return ShapeFunctionSet(order)


# ---------------------------------------------------------------------------
# Generalized symmetric eigenproblems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenSolution:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, U-orthonormal


@dataclass(frozen=True)
class GroundPoint:
    """Lowest eigenpair of H(λ) = H0 + λV at one (λ, size) point.

    ``dv_expectation`` is cᵀVc for the overlap-normalized ground vector, which
    by Hellmann-Feynman equals dE/dλ.
    """

    lam: float
    size: int
    energy: float
    dv_expectation: float
    coefficients: np.ndarray


def solve_generalized_symmetric(H, U, k: int = 1) -> EigenSolution:
    """k lowest eigenpairs of H v = ε U v with U symmetric positive definite.

    The pencil is reduced to standard form with the Cholesky factor of U and
    solved by a dense symmetric eigensolver.
    """
    H = np.asarray(H, dtype=float)
    U = np.asarray(U, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape != U.shape:
        raise ParameterError(f"shape mismatch: H {H.shape}, U {U.shape}")
    n = H.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"need 1 <= k <= {n}, got {k}")
    try:
        L = scipy.linalg.cholesky(U, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError("overlap matrix is not positive definite") from exc
    tmp = scipy.linalg.solve_triangular(L, H, lower=True)
    A = scipy.linalg.solve_triangular(L, tmp.T, lower=True)
    A = 0.5 * (A + A.T)
    w, y = scipy.linalg.eigh(A, subset_by_index=[0, k - 1], driver="evr")
    v = scipy.linalg.solve_triangular(L, y, lower=True, trans="T")
    return EigenSolution(eigenvalues=w, eigenvectors=v)


# Banded storage follows LAPACK's upper convention: ab[kd + i - j, j] = A[i, j].


def dense_to_banded(A, kd: int) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    ab = np.zeros((kd + 1, n))
    for k in range(kd + 1):
        ab[kd - k, k:] = np.diagonal(A, k)
    return ab


def banded_to_dense(ab: np.ndarray) -> np.ndarray:
    kd = ab.shape[0] - 1
    n = ab.shape[1]
    A = np.zeros((n, n))
    for k in range(kd + 1):
        diag = ab[kd - k, k:]
        A[np.arange(n - k), np.arange(k, n)] = diag
        A[np.arange(k, n), np.arange(n - k)] = diag
    return A


def banded_matvec(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    kd = ab.shape[0] - 1
    y = ab[kd] * x
    for k in range(1, kd + 1):
        band = ab[kd - k, k:]
        y[:-k] += band * x[k:]
        y[k:] += band * x[:-k]
    return y


def lowest_banded_generalized(
    Hb: np.ndarray, Ub: np.ndarray, rtol: float = 1e-11, max_iter: int = 200
) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of a banded symmetric pencil (H, U).

    σ lies below the lowest eigenvalue exactly when H - σU is positive
    definite, so the eigenvalue is bracketed by bisection on the success of a
    banded Cholesky factorization. Inverse iteration with the factor at the
    lower bracket then yields the eigenvector, and the energy is returned as
    its Rayleigh quotient. The eigenvector is U-normalized.
    """
    if Hb.shape != Ub.shape:
        raise ParameterError(f"band shape mismatch: {Hb.shape} vs {Ub.shape}")
    _, info = dpbtrf(Ub)
    if info != 0:
        raise DecompositionError("overlap matrix is not positive definite")

    def factor(sigma):
        c, info = dpbtrf(Hb - sigma * Ub)
        return c if info == 0 else None

    lo = -1.0
    for _ in range(max_iter):
        if factor(lo) is not None:
            break
        lo *= 2.0
    else:
        raise NumericalError("could not find a lower bound for the spectrum")
    step = 1.0
    hi = lo + step
    for _ in range(max_iter):
        if factor(hi) is None:
            break
        lo, step = hi, 2.0 * step
        hi = lo + step
    else:
        raise NumericalError("could not find an upper bound for the lowest eigenvalue")
    for _ in range(max_iter):
        if hi - lo <= rtol * max(1.0, abs(lo)):
            break
        mid = 0.5 * (lo + hi)
        if factor(mid) is not None:
            lo = mid
        else:
            hi = mid
    chol = factor(lo)
    x = np.ones(Hb.shape[1])
    for _ in range(4):
        x, info = dpbtrs(chol, banded_matvec(Ub, x))
        if info != 0 or not np.all(np.isfinite(x)):
            raise NumericalError("inverse iteration broke down")
        x /= np.sqrt(x @ banded_matvec(Ub, x))
    energy = float(x @ banded_matvec(Hb, x))
    return energy, x
