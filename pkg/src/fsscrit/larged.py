"""Large-dimension Hartree-Fock two-electron atom and its symmetry breaking.

The D → ∞ effective Hamiltonian

    H(r1, r2) = ½(1/r1² + 1/r2²) - Z(1/r1 + 1/r2) + 1/√(r1² + r2²) - ε(r1 - r2)

has a symmetric minimum r1 = r2 for Z ≥ Zc = √2 and a broken pair of minima
below. The asymmetry η = (r1 - r2)/r1 plays the order parameter, Z the
temperature and ε the ordering field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.stats import linregress

from .errors import NumericalError, ParameterError, WindowError

SQRT2 = math.sqrt(2.0)
FIT_WINDOW = (1e-4, 1e-2)
FIT_POINTS = 17
MIN_FIT_POINTS = 8
RUNAWAY_RADIUS = 1e7


def effective_energy(r1: float, r2: float, Z: float, field: float = 0.0) -> float:
    if r1 <= 0 or r2 <= 0:
        raise ParameterError(f"radii must be positive, got ({r1}, {r2})")
    return (
        0.5 * (1.0 / r1**2 + 1.0 / r2**2)
        - Z * (1.0 / r1 + 1.0 / r2)
        + 1.0 / math.sqrt(r1 * r1 + r2 * r2)
        - field * (r1 - r2)
    )


def gradient(r1: float, r2: float, Z: float, field: float = 0.0) -> np.ndarray:
    s32 = (r1 * r1 + r2 * r2) ** -1.5
    return np.array(
        [
            -1.0 / r1**3 + Z / r1**2 - r1 * s32 - field,
            -1.0 / r2**3 + Z / r2**2 - r2 * s32 + field,
        ]
    )


def hessian(r1: float, r2: float, Z: float) -> np.ndarray:
    s = r1 * r1 + r2 * r2
    s32, s52 = s**-1.5, s**-2.5
    h11 = 3.0 / r1**4 - 2.0 * Z / r1**3 - s32 + 3.0 * r1 * r1 * s52
    h22 = 3.0 / r2**4 - 2.0 * Z / r2**3 - s32 + 3.0 * r2 * r2 * s52
    h12 = 3.0 * r1 * r2 * s52
    return np.array([[h11, h12], [h12, h22]])


def symmetric_radius(Z: float) -> float:
    """Minimiser along r1 = r2 = r, where H = 1/r² - (2Z - 1/√2)/r."""
    q = 2.0 * Z - 1.0 / SQRT2
    if q <= 0:
        raise ParameterError(f"no symmetric minimum for Z = {Z}")
    return 2.0 / q


def symmetric_energy(Z: float) -> float:
    return -((2.0 * Z - 1.0 / SQRT2) ** 2) / 4.0


def symmetric_hessian_min(Z: float) -> float:
    """Smallest Hessian eigenvalue at the symmetric stationary point."""
    r = symmetric_radius(Z)
    return float(np.linalg.eigvalsh(hessian(r, r, Z))[0])


@dataclass(frozen=True)
class LargeDState:
    Z: float
    field: float
    r1: float
    r2: float
    energy: float
    eta: float
    hessian_eigs: tuple[float, float]
    iterations: int

    @property
    def hess_min(self) -> float:
        return self.hessian_eigs[0]


def _newton(x: np.ndarray, Z: float, field: float, max_iter: int = 500) -> tuple[np.ndarray, int]:
    """Damped Newton with an eigenvalue-shifted Hessian for descent."""
    energy = effective_energy(*x, Z, field)
    for it in range(1, max_iter + 1):
        g = gradient(*x, Z, field)
        gnorm = float(np.max(np.abs(g)))
        if gnorm < 1e-15 * max(1.0, Z):
            return x, it
        w, v = np.linalg.eigh(hessian(*x, Z))
        # near Z = 1 the outer-electron curvature is legitimately tiny, so only
        # non-positive curvature is shifted
        w = np.where(w > 0, w, np.abs(w) + 1e-3)
        step = -(v @ ((v.T @ g) / w))
        t = 1.0
        while True:
            trial = x + t * step
            if np.all(trial > 0):
                e_trial = effective_energy(*trial, Z, field)
                if e_trial <= energy + 1e-15 * abs(energy):
                    break
                # near the optimum energies stop resolving progress; fall back to the gradient
                if np.max(np.abs(gradient(*trial, Z, field))) < gnorm:
                    break
            t *= 0.5
            if t < 1e-12:
                return x, it
        x, energy = trial, e_trial
        if np.max(x) > RUNAWAY_RADIUS:
            raise NumericalError(
                f"no bounded minimum for Z={Z}, ε={field}: an electron escapes (x={x})"
            )
        if np.max(np.abs(t * step)) < 1e-16 * np.max(x):
            return x, it
    raise NumericalError(
        f"Newton did not converge for Z={Z}, ε={field}: x={x}, |g|={gnorm:.3e}"
    )


def _state(x: np.ndarray, Z: float, field: float, iterations: int) -> LargeDState:
    r1, r2 = float(x[0]), float(x[1])
    eigs = np.linalg.eigvalsh(hessian(r1, r2, Z))
    return LargeDState(
        Z=Z,
        field=field,
        r1=r1,
        r2=r2,
        energy=effective_energy(r1, r2, Z, field),
        eta=(r1 - r2) / r1,
        hessian_eigs=(float(eigs[0]), float(eigs[1])),
        iterations=iterations,
    )


def minimize_ground(Z: float, field: float = 0.0) -> LargeDState:
    """Global minimum of the effective Hamiltonian over (r1, r2).

    Starts from the symmetric closed form and from the asymmetric seeds
    (r, r/2) and (r/2, r); the lowest stable minimum wins. At zero field the
    broken branch is reported with η ≥ 0.

    For Z ≤ 1 at zero field the outer electron sees no net attraction and the
    infimum is the ionisation limit r1 → ∞, r2 = 1/Z, E = -Z²/2, which is
    returned as such (η = 1).
    """
    if Z <= 0.9:
        raise ParameterError(f"Z must exceed 0.9, got {Z}")
    if field == 0.0 and Z <= 1.0:
        return LargeDState(Z, 0.0, math.inf, 1.0 / Z, -0.5 * Z * Z, 1.0, (0.0, Z**4), 0)
    r = symmetric_radius(Z)
    seeds = [np.array([r, r]), np.array([r, 0.5 * r]), np.array([0.5 * r, r])]
    best = None
    for seed in seeds:
        x, its = _newton(seed, Z, field)
        state = _state(x, Z, field, its)
        if state.hess_min < -1e-9:
            continue
        if best is None or state.energy < best.energy - 1e-14 * abs(state.energy):
            best = state
    if best is None:
        raise NumericalError(f"no stable minimum found for Z={Z}, ε={field}")
    if field == 0.0 and best.eta < 0:
        x, its = _newton(np.array([best.r2, best.r1]), Z, 0.0)
        best = _state(x, Z, 0.0, its)
    if field == 0.0 and abs(best.eta) < 1e-7 and Z >= SQRT2 - 1e-9:
        # collapse round-off asymmetry onto the exact symmetric solution
        best = _state(np.array([r, r]), Z, 0.0, best.iterations)
    return best


def critical_charge(lo: float = 1.2, hi: float = 1.6, tol: float = 1e-13) -> float:
    """Bisection on the sign change of the symmetric solution's softest mode."""
    if not symmetric_hessian_min(lo) < 0 < symmetric_hessian_min(hi):
        raise NumericalError("bracket does not enclose the stability limit")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if symmetric_hessian_min(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def field_for_asymmetry(eta: float, Z: float) -> tuple[float, float]:
    """Field ε that stabilises asymmetry η, and the radius r1 = r.

    Stationarity with r2 = (1-η) r needs ∂H0/∂r1 + ∂H0/∂r2 = 0 (solved for
    r) and then ε = ∂H0/∂r1.
    """
    if not 0 < eta < 1:
        raise ParameterError(f"η must lie in (0, 1), got {eta}")

    def balance(r):
        g = gradient(r, (1.0 - eta) * r, Z, 0.0)
        return g[0] + g[1]

    r0 = symmetric_radius(Z)
    r = brentq(balance, 0.2 * r0, 5.0 * r0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(gradient(r, (1.0 - eta) * r, Z, 0.0)[0]), r


def susceptibility(Z: float) -> float:
    """∂η/∂ε at ε = 0 on the symmetric branch (Z > Zc), by linear response.

    The field couples to the antisymmetric mode with stiffness H11 - H12, so
    dr1 = -dr2 = dε / (H11 - H12) and dη = 2 dε / (r (H11 - H12)).
    """
    r = symmetric_radius(Z)
    H = hessian(r, r, Z)
    soft = H[0, 0] - H[0, 1]
    if soft <= 0:
        raise ParameterError(f"symmetric branch unstable at Z = {Z}")
    return 2.0 / (r * soft)


def susceptibility_fd(Z: float, step: float = 1e-6) -> float:
    """Centered finite difference of η(ε) from full minimisations."""
    up = minimize_ground(Z, step).eta
    down = minimize_ground(Z, -step).eta
    return (up - down) / (2.0 * step)


@dataclass(frozen=True)
class ExponentFit:
    value: float
    stderr: float
    points: int


@dataclass(frozen=True)
class MeanFieldExponents:
    z_c: float
    beta: ExponentFit
    alpha_E: ExponentFit
    delta: ExponentFit
    gamma: ExponentFit
    # β with a leading √d correction term; diagnostic only
    beta_corrected: ExponentFit | None = None


def _fit(x: np.ndarray, y: np.ndarray, what: str) -> ExponentFit:
    ok = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if ok.sum() < MIN_FIT_POINTS:
        raise WindowError(f"{what}: only {int(ok.sum())} valid points in fit window")
    span = math.log10(x[ok].max() / x[ok].min())
    if span < 1.5:
        raise WindowError(f"{what}: window spans only {span:.2f} decades")
    res = linregress(np.log(x[ok]), np.log(y[ok]))
    return ExponentFit(float(res.slope), float(res.stderr), int(ok.sum()))


def _fit_corrected(x: np.ndarray, y: np.ndarray) -> ExponentFit:
    """ln y = c + p ln x + b √x; the slope p with its standard error."""
    X = np.column_stack([np.ones_like(x), np.log(x), np.sqrt(x)])
    coef, *_ = np.linalg.lstsq(X, np.log(y), rcond=None)
    resid = np.log(y) - X @ coef
    dof = len(x) - 3
    s2 = float(resid @ resid) / dof if dof > 0 else math.nan
    err = math.sqrt(s2 * np.linalg.inv(X.T @ X)[1, 1])
    return ExponentFit(float(coef[1]), err, len(x))


def extract_exponents(
    window: tuple[float, float] = FIT_WINDOW, points: int = FIT_POINTS, z_c: float | None = None
) -> MeanFieldExponents:
    """Log-log fits of the four mean-field laws over ``window``.

    β:  η(Zc - d)                          vs d  (also refit with a √d correction)
    α:  E_broken(Zc - d) - E_sym(Zc - d)   vs d  (singular part of the energy)
    δ:  ε(Zc, η)                           vs η
    γ:  ∂η/∂ε at ε = 0, Z = Zc + d         vs d  (slope is -γ)
    """
    z_c = critical_charge() if z_c is None else z_c
    grid = np.logspace(math.log10(window[0]), math.log10(window[1]), points)

    below = [minimize_ground(z_c - d) for d in grid]
    eta = np.array([s.eta for s in below])
    gap = np.array([symmetric_energy(z_c - d) - s.energy for d, s in zip(grid, below)])
    field = np.array([field_for_asymmetry(e, z_c)[0] for e in grid])
    chi = np.array([susceptibility(z_c + d) for d in grid])

    beta = _fit(grid, eta, "beta")
    alpha = _fit(grid, gap, "alpha")
    delta = _fit(grid, field, "delta")
    g = _fit(grid, chi, "gamma")
    return MeanFieldExponents(
        z_c, beta, alpha, delta, ExponentFit(-g.value, g.stderr, g.points), _fit_corrected(grid, eta)
    )
