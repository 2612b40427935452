"""Slater-Laguerre basis for the ℓ = 0 Hulthén problem.

Basis functions are Φ_n(r) = c_n e^{-r/2} L_n^(2)(r) with
c_n = [4π (n+1)(n+2)]^{-1/2}, which makes them orthonormal under the
measure 4π r² dr. The kinetic matrix is exact; the potential matrix is
computed by Gauss-Laguerre quadrature and checked against a larger rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, ParameterError
from .hulthen import hulthen_shape
from .numerics import (
    GroundPoint,
    gauss_laguerre,
    laguerre_L2,
    laguerre_L2_table,
    solve_generalized_symmetric,
)

POTENTIAL_RULE = 200
CHECK_RULE = 300
POTENTIAL_TOL = 1e-9


def _norms(N: int) -> np.ndarray:
    n = np.arange(N, dtype=float)
    return (n + 1.0) * (n + 2.0)


def basis_function(n: int, r):
    if n < 0:
        raise ParameterError(f"basis index must be >= 0, got {n}")
    r = np.asarray(r, dtype=float)
    c = math.sqrt(1.0 / (4.0 * math.pi * (n + 1) * (n + 2)))
    val = c * np.exp(-r / 2.0) * laguerre_L2(n, r)
    return float(val) if np.ndim(val) == 0 else val


def kinetic_matrix(N: int) -> np.ndarray:
    """Exact ½∫(Φ_m')(Φ_n') 4π r² dr for m, n < N.

    With u_n = e^{-r/2} L_n^(2), integration by parts and the Laguerre ODE give
      ½∫ r² u_m' u_n' dr = ½ [ ∫e^{-r} L_m (r L_n') dr - ¼ I2 + (n+1) I1 ]
    where r L_n' = n L_n - (n+2) L_{n-1}, and the weighted Gram integrals are
      I0[m,n] = ∫ e^{-r} L_m L_n   = Σ_{i≤min} (m-i+1)(n-i+1)
      I1[m,n] = ∫ r e^{-r} L_m L_n = (k+1)(k+2)/2,  k = min(m, n)
      I2[m,n] = ∫ r² e^{-r} L_m L_n = δ_mn (n+1)(n+2).
    """
    if N < 1:
        raise ParameterError(f"need N >= 1, got {N}")
    idx = np.arange(N)
    m, n = np.meshgrid(idx, idx, indexing="ij")
    k = np.minimum(m, n)
    # I0 closed form: Σ_{i=0}^{k} (m-i+1)(n-i+1)
    i = np.arange(N)[:, None, None]
    mask = i <= k[None]
    I0 = np.sum(np.where(mask, (m[None] - i + 1) * (n[None] - i + 1), 0), axis=0).astype(float)
    I1 = (k + 1.0) * (k + 2.0) / 2.0
    I2 = np.diag(_norms(N))
    I0_prev = np.zeros_like(I0)
    I0_prev[:, 1:] = I0[:, :-1]  # ∫ e^{-r} L_m L_{n-1}
    r_dL = n * I0 - (n + 2.0) * I0_prev
    K = 0.5 * (r_dL - 0.25 * I2 + (n + 1.0) * I1)
    K = K / np.sqrt(np.outer(_norms(N), _norms(N)))
    return 0.5 * (K + K.T)


def potential_matrix(N: int, rule: int = POTENTIAL_RULE) -> np.ndarray:
    """4π∫ Φ_m Φ_n (-e^{-r}/(1-e^{-r})) r² dr by Gauss-Laguerre of the given order."""
    q = gauss_laguerre(rule)
    L = laguerre_L2_table(N - 1, q.nodes)
    f = q.weights * q.nodes**2 * hulthen_shape(q.nodes)
    V = (L * f) @ L.T / np.sqrt(np.outer(_norms(N), _norms(N)))
    return 0.5 * (V + V.T)


def overlap_matrix(N: int) -> np.ndarray:
    """The basis is orthonormal, so the Gram matrix is the identity."""
    return np.eye(N)


@dataclass(frozen=True, eq=False)
class OperatorPair:
    """λ-independent matrices of H = kinetic + λ·coupling_potential at size N."""

    kinetic: np.ndarray
    coupling_potential: np.ndarray
    overlap: np.ndarray
    size: int

    def ground_point(self, lam: float) -> GroundPoint:
        return ground_point(self, lam)


def build_operator_pair(N: int) -> OperatorPair:
    if not 2 <= N <= 60:
        raise ParameterError(f"basis size must lie in [2, 60], got {N}")
    V = potential_matrix(N, POTENTIAL_RULE)
    check = potential_matrix(N, CHECK_RULE)
    diff = float(np.max(np.abs(V - check)))
    if diff > POTENTIAL_TOL:
        raise AccuracyError(f"potential quadrature unconverged at N={N}: {diff:.2e}")
    mats = [kinetic_matrix(N), V, overlap_matrix(N)]
    for mat in mats:
        mat.setflags(write=False)
    return OperatorPair(*mats, size=N)


def ground_point(pair: OperatorPair, lam: float) -> GroundPoint:
    if lam < 0:
        raise ParameterError(f"coupling must be non-negative, got {lam}")
    H = pair.kinetic + lam * pair.coupling_potential
    sol = solve_generalized_symmetric(H, pair.overlap, 1)
    c = sol.eigenvectors[:, 0]
    # fix the overall sign so coefficient vectors are reproducible
    if c[np.argmax(np.abs(c))] < 0:
        c = -c
    return GroundPoint(
        lam=float(lam),
        size=pair.size,
        energy=float(sol.eigenvalues[0]),
        dv_expectation=float(c @ pair.coupling_potential @ c),
        coefficients=c,
    )
