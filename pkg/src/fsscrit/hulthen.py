"""Closed-form Hulthén results used as the oracle for every numerical method.

The potential is V(r) = -(λ/a²) e^{-r/a} / (1 - e^{-r/a}) and the radial
equation uses the kinetic operator -½ d²/dr² (atomic units, ℓ = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoBoundStateError, ParameterError

# Critical exponents of the Hulthén threshold: E ~ (λ - λc)^2, ξ ~ (λ - λc)^-1.
ALPHA = 2.0
NU = 1.0


@dataclass(frozen=True)
class HulthenPotential:
    lam: float
    a: float = 1.0

    def __post_init__(self):
        if self.a <= 0:
            raise ParameterError(f"range parameter must be positive, got {self.a}")
        if self.lam < 0:
            raise ParameterError(f"coupling must be non-negative, got {self.lam}")

    def __call__(self, r):
        return self.lam * hulthen_shape(np.asarray(r, dtype=float) / self.a) / self.a**2


@dataclass(frozen=True)
class AnalyticCriticality:
    lambda_c: float
    alpha: float
    nu: float
    xi: float | None


def hulthen_shape(r):
    """-e^{-r}/(1 - e^{-r}) = -1/(e^r - 1), the coupling-free potential at a = 1."""
    with np.errstate(over="ignore"):  # e^r overflows to inf far out; the ratio is then -0
        return -1.0 / np.expm1(r)


def energy_level(n: int, lam: float, a: float = 1.0) -> float | None:
    """E_n = -(2λ - n²)² / (8 n² a²), or None when level n is unbound."""
    if a <= 0:
        raise ParameterError(f"range parameter must be positive, got {a}")
    if n < 1:
        raise ParameterError(f"level index starts at 1, got {n}")
    if lam <= critical_coupling(n):
        return None
    return -((2.0 * lam - n * n) ** 2) / (8.0 * n * n * a * a)


def critical_coupling(n: int) -> float:
    if n < 1:
        raise ParameterError(f"level index starts at 1, got {n}")
    return n * n / 2.0


def max_bound_level(lam: float) -> int:
    """Largest n with n² < 2λ (0 when nothing is bound)."""
    if lam < 0:
        raise ParameterError(f"coupling must be non-negative, got {lam}")
    n = math.isqrt(int(2.0 * lam))
    if n > 0 and n * n >= 2.0 * lam:  # exactly at threshold: level n is unbound
        n -= 1
    return n


def decay_rate(n: int, lam: float, a: float = 1.0) -> float:
    """Asymptotic decay constant κ of χ_n ~ e^{-κ r}, κ = √(-2 E_n)."""
    energy = energy_level(n, lam, a)
    if energy is None:
        raise NoBoundStateError(f"level {n} is unbound at λ = {lam}")
    return math.sqrt(-2.0 * energy)


def correlation_length(lam: float, a: float = 1.0) -> float:
    """Ground-state length ξ of the radial density tail P(r) ~ e^{-r/ξ}.

    P = |χ|² decays with rate 2κ, so ξ = 1/(2κ) = a / (2λ - 1).
    """
    if lam <= critical_coupling(1):
        raise NoBoundStateError(f"no bound ground state at λ = {lam}")
    return 1.0 / (2.0 * decay_rate(1, lam, a))


def criticality(lam: float | None = None, n: int = 1) -> AnalyticCriticality:
    xi = correlation_length(lam) if lam is not None and n == 1 else None
    return AnalyticCriticality(critical_coupling(n), ALPHA, NU, xi)
