"""Finite-size scaling analysis of truncated expectation values.

Given ground-state energies E^(N)(λ) and ⟨∂V_λ/∂λ⟩^(N)(λ) on a λ-grid for a
ladder of sizes N, this module forms the log-ratio Δ functions, the Γ_α
curves, their crossings (pseudocritical points), the 1/N extrapolation and a
numerical data-collapse score.

Scaling convention: at λc, ⟨O⟩^(N) ~ N^{-μ/ν}, so Δ of an exact power law
is +μ/ν and the collapse ordinate is ⟨O⟩^(N) N^{+μ/ν}.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, NoCrossingError, ParameterError

log = logging.getLogger(__name__)

POLE_TOL = 1e-12
CROSSING_TOL = 1e-10

# (N, λ) -> (E0, ⟨∂V/∂λ⟩)
Evaluator = Callable[[int, float], tuple[float, float]]


# ---------------------------------------------------------------------------
# Expectation tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExpectationTable:
    method: str
    sizes: tuple[int, ...]
    lambdas: np.ndarray
    energy: np.ndarray  # shape (len(sizes), len(lambdas))
    dv: np.ndarray

    def __post_init__(self):
        shape = (len(self.sizes), len(self.lambdas))
        if self.energy.shape != shape or self.dv.shape != shape:
            raise ParameterError(f"table arrays must have shape {shape}")
        if list(self.sizes) != sorted(set(self.sizes)):
            raise ParameterError("sizes must be strictly increasing")
        if not np.all(np.isfinite(self.energy)):
            raise ParameterError("table contains non-finite energies")

    def index(self, n: int) -> int:
        try:
            return self.sizes.index(n)
        except ValueError:
            raise ParameterError(f"size {n} not in table") from None

    def to_csv(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["N", "lambda", "energy", "dV"])
            for i, n in enumerate(self.sizes):
                for j, lam in enumerate(self.lambdas):
                    out.writerow([n, _fmt(lam), _fmt(self.energy[i, j]), _fmt(self.dv[i, j])])

    @classmethod
    def from_csv(cls, path: Path, method: str = "unknown") -> "ExpectationTable":
        rows: dict[int, list[tuple[float, float, float]]] = {}
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.setdefault(int(rec["N"]), []).append(
                    (float(rec["lambda"]), float(rec["energy"]), float(rec["dV"]))
                )
        sizes = tuple(sorted(rows))
        grids = [np.array([r[0] for r in rows[n]]) for n in sizes]
        if any(len(g) != len(grids[0]) or np.any(g != grids[0]) for g in grids):
            raise ParameterError("λ-grids differ between sizes")
        energy = np.array([[r[1] for r in rows[n]] for n in sizes])
        dv = np.array([[r[2] for r in rows[n]] for n in sizes])
        return cls(method, sizes, grids[0], energy, dv)


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# Δ and Γ
# ---------------------------------------------------------------------------


def delta(o_n: float, o_n2: float, n: int, n2: int) -> float:
    """Δ = ln(⟨O⟩^N / ⟨O⟩^N') / ln(N'/N) on magnitudes of same-sign values."""
    if n == n2:
        raise ParameterError("sizes must differ")
    if o_n == 0 or o_n2 == 0 or (o_n > 0) != (o_n2 > 0):
        raise DomainError(f"Δ undefined for values {o_n!r}, {o_n2!r}")
    return math.log(abs(o_n) / abs(o_n2)) / math.log(n2 / n)


def delta_array(o_n: np.ndarray, o_n2: np.ndarray, n: int, n2: int) -> np.ndarray:
    """Vectorised Δ; NaN where the values are zero or differ in sign."""
    o_n = np.asarray(o_n, dtype=float)
    o_n2 = np.asarray(o_n2, dtype=float)
    bad = (o_n == 0) | (o_n2 == 0) | (np.sign(o_n) != np.sign(o_n2))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(np.abs(o_n) / np.abs(o_n2)) / math.log(n2 / n)
    out[bad] = np.nan
    return out


def gamma_from_deltas(delta_h: float, delta_dv: float) -> float:
    """Γ_α = Δ_H / (Δ_H - Δ_dV); raises DomainError at a pole."""
    den = delta_h - delta_dv
    if not math.isfinite(den) or abs(den) < POLE_TOL:
        raise DomainError(f"Γ pole: Δ_H - Δ_dV = {den!r}")
    return delta_h / den


def gamma_alpha(lam: float, n: int, n_prime: int, table: ExpectationTable) -> float:
    j = np.flatnonzero(table.lambdas == lam)
    if j.size == 0:
        raise ParameterError(f"λ = {lam} is not on the table grid")
    i, k = table.index(n), table.index(n_prime)
    dh = delta(table.energy[i, j[0]], table.energy[k, j[0]], n, n_prime)
    dv = delta(table.dv[i, j[0]], table.dv[k, j[0]], n, n_prime)
    return gamma_from_deltas(dh, dv)


@dataclass(frozen=True, eq=False)
class GammaCurve:
    n: int
    n_prime: int
    lambdas: np.ndarray
    values: np.ndarray  # NaN where undefined
    delta_h: np.ndarray
    denominator: np.ndarray
    poles: np.ndarray  # True where |Δ_H - Δ_dV| < POLE_TOL
    evaluate: Callable[[float], tuple[float, float]] | None = field(default=None, repr=False)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)


def gamma_curve(
    table: ExpectationTable, n: int, n_prime: int, evaluator: Evaluator | None = None
) -> GammaCurve:
    if n == n_prime:
        raise ParameterError("a Γ curve needs two distinct sizes")
    i, k = table.index(n), table.index(n_prime)
    dh = delta_array(table.energy[i], table.energy[k], n, n_prime)
    dv = delta_array(table.dv[i], table.dv[k], n, n_prime)
    den = dh - dv
    poles = np.isfinite(den) & (np.abs(den) < POLE_TOL)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = dh / den
    values[poles | ~np.isfinite(den)] = np.nan

    def evaluate(lam: float) -> tuple[float, float]:
        e1, v1 = evaluator(n, lam)
        e2, v2 = evaluator(n_prime, lam)
        d_h = delta(e1, e2, n, n_prime)
        return gamma_from_deltas(d_h, delta(v1, v2, n, n_prime)), d_h

    exact = evaluate if evaluator is not None else None
    return GammaCurve(n, n_prime, table.lambdas, values, dh, den, poles, exact)


# ---------------------------------------------------------------------------
# Crossings
# ---------------------------------------------------------------------------


def _valid_brackets(a: GammaCurve, b: GammaCurve) -> list[int]:
    d = a.values - b.values
    ok = np.isfinite(d[:-1]) & np.isfinite(d[1:])
    # a bracket may not straddle a pole of either curve
    ok &= np.sign(a.denominator[:-1]) == np.sign(a.denominator[1:])
    ok &= np.sign(b.denominator[:-1]) == np.sign(b.denominator[1:])
    change = (d[:-1] * d[1:] < 0) | ((d[:-1] == 0) & (d[1:] != 0))
    return [int(j) for j in np.flatnonzero(ok & change)]


def _segment_interpolant(curve: GammaCurve, j: int) -> Callable[[float], float]:
    valid = curve.valid
    lo = j
    while lo > 0 and valid[lo - 1]:
        lo -= 1
    hi = j + 1
    while hi < len(valid) - 1 and valid[hi + 1]:
        hi += 1
    x = curve.lambdas[lo : hi + 1]
    y = curve.values[lo : hi + 1]
    if len(x) >= 4:
        spline = CubicSpline(x, y)
        return lambda lam: float(spline(lam))
    return lambda lam: float(np.interp(lam, x, y))


def find_crossing(
    curve_a: GammaCurve, curve_b: GammaCurve, tol: float = CROSSING_TOL
) -> tuple[float, float]:
    """Abscissa and ordinate where two Γ curves cross.

    A sign change of A - B is located on the shared grid, skipping brackets
    that touch undefined points or straddle a pole, then refined by
    bisection. If both curves carry an exact evaluator, bisection uses it;
    otherwise it runs on cubic interpolants of the sampled values.
    """
    if len(curve_a.lambdas) != len(curve_b.lambdas) or np.any(curve_a.lambdas != curve_b.lambdas):
        raise ParameterError("curves must share the λ-grid")
    brackets = _valid_brackets(curve_a, curve_b)
    if not brackets:
        raise NoCrossingError(
            f"Γ({curve_a.n},{curve_a.n_prime}) and Γ({curve_b.n},{curve_b.n_prime}) never cross"
        )
    if len(brackets) > 1:
        log.warning(
            "multiple crossings for (%d,%d)/(%d,%d) at λ ≈ %s; using the first",
            curve_a.n, curve_a.n_prime, curve_b.n, curve_b.n_prime,
            [round(float(curve_a.lambdas[j]), 6) for j in brackets],
        )
    j = brackets[0]
    lo, hi = float(curve_a.lambdas[j]), float(curve_a.lambdas[j + 1])
    if curve_a.values[j] == curve_b.values[j]:
        return lo, float(curve_a.values[j])

    if curve_a.evaluate is not None and curve_b.evaluate is not None:
        fa = lambda lam: curve_a.evaluate(lam)[0]  # noqa: E731
        fb = lambda lam: curve_b.evaluate(lam)[0]  # noqa: E731
    else:
        fa = _segment_interpolant(curve_a, j)
        fb = _segment_interpolant(curve_b, j)

    d_lo = fa(lo) - fb(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        d_mid = fa(mid) - fb(mid)
        if d_mid == 0:
            lo = hi = mid
            break
        if (d_mid > 0) == (d_lo > 0):
            lo, d_lo = mid, d_mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    return lam, fa(lam)


# ---------------------------------------------------------------------------
# Pseudocritical sequences and extrapolation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PseudoCriticalEntry:
    n: int
    n_prime: int
    n_second: int
    lambda_c: float
    alpha: float
    nu: float
    delta_h: float


@dataclass(frozen=True)
class Extrapolation:
    lambda_c: float
    alpha: float
    nu: float
    lambda_c_err: float
    alpha_err: float
    nu_err: float
    degree: int


@dataclass(frozen=True)
class PseudoCriticalSequence:
    entries: tuple[PseudoCriticalEntry, ...]
    extrapolated: Extrapolation | None = None


def pseudocritical_sequence(
    table: ExpectationTable, evaluator: Evaluator | None = None
) -> PseudoCriticalSequence:
    """Crossing of Γ(·; N, N') with Γ(·; N', N'') for each consecutive triple.

    Each entry is labelled by the smallest size N of its triple. ν^(N) comes
    from α^(N) / Δ_H(λ^(N); N, N').
    """
    if len(table.sizes) < 3:
        raise ParameterError("need at least 3 sizes for a pseudocritical sequence")
    curves = [
        gamma_curve(table, n, m, evaluator) for n, m in zip(table.sizes, table.sizes[1:])
    ]
    entries = []
    for first, second in zip(curves, curves[1:]):
        try:
            lam, alpha = find_crossing(first, second)
        except NoCrossingError as exc:
            log.warning("skipping N=%d: %s", first.n, exc)
            continue
        if first.evaluate is not None:
            _, dh = first.evaluate(lam)
        else:
            i, k = table.index(first.n), table.index(first.n_prime)
            e1 = np.interp(lam, table.lambdas, table.energy[i])
            e2 = np.interp(lam, table.lambdas, table.energy[k])
            dh = delta(e1, e2, first.n, first.n_prime)
        entries.append(
            PseudoCriticalEntry(first.n, first.n_prime, second.n_prime, lam, alpha, alpha / dh, dh)
        )
    seq = PseudoCriticalSequence(tuple(entries))
    if len(entries) >= 3:
        seq = PseudoCriticalSequence(seq.entries, extrapolate(seq))
    return seq


def extrapolate_to_zero(inv_n: Sequence[float], values: Sequence[float], degree: int = 2):
    """Least-squares polynomial in 1/N evaluated at 1/N = 0.

    Returns (value, standard error of the intercept, degree used). The error
    is NaN when the fit has no residual degrees of freedom.
    """
    x = np.asarray(inv_n, dtype=float)
    y = np.asarray(values, dtype=float)
    X = np.vander(x, degree + 1, increasing=True)
    if np.linalg.matrix_rank(X) < degree + 1:
        if degree == 1:
            raise DomainError("cannot extrapolate: fewer than two distinct sizes")
        log.warning("degenerate degree-%d fit; falling back to degree 1", degree)
        return extrapolate_to_zero(x, y, 1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = len(x) - (degree + 1)
    if dof > 0:
        resid = y - X @ coef
        s2 = float(resid @ resid) / dof
        err = math.sqrt(s2 * np.linalg.inv(X.T @ X)[0, 0])
    else:
        err = math.nan
    return float(coef[0]), err, degree


def extrapolate(seq: PseudoCriticalSequence, degree: int = 2) -> Extrapolation:
    if len(seq.entries) < 3:
        raise ParameterError("need at least 3 entries to extrapolate")
    inv_n = [1.0 / e.n for e in seq.entries]
    lam, lam_err, deg = extrapolate_to_zero(inv_n, [e.lambda_c for e in seq.entries], degree)
    alpha, alpha_err, _ = extrapolate_to_zero(inv_n, [e.alpha for e in seq.entries], deg)
    nu, nu_err, _ = extrapolate_to_zero(inv_n, [e.nu for e in seq.entries], deg)
    return Extrapolation(lam, alpha, nu, lam_err, alpha_err, nu_err, deg)


# ---------------------------------------------------------------------------
# Data collapse
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CollapseDataset:
    lambda_c: float
    alpha: float
    nu: float
    x: dict[int, np.ndarray]
    y: dict[int, np.ndarray]
    quality: float


def data_collapse(
    table: ExpectationTable, lambda_c: float, alpha: float, nu: float
) -> CollapseDataset:
    """Rescale to x = N^{1/ν}(λ - λc), y = E0^(N) N^{α/ν} and score the collapse.

    Every cloud gets an interpolating cubic spline. Each point is compared
    with the mean of the other clouds' splines wherever they cover its x;
    the score is the mean squared deviation over the pooled variance of y,
    zero when all clouds lie on one curve.
    """
    if not (math.isfinite(lambda_c) and math.isfinite(alpha) and math.isfinite(nu)):
        raise ParameterError("collapse parameters must be finite")
    if nu <= 0:
        raise ParameterError(f"ν must be positive, got {nu}")
    xs, ys, splines = {}, {}, {}
    for i, n in enumerate(table.sizes):
        x = n ** (1.0 / nu) * (table.lambdas - lambda_c)
        y = table.energy[i] * n ** (alpha / nu)
        xs[n], ys[n] = x, y
        splines[n] = CubicSpline(x, y)
    deviations = []
    for n in table.sizes:
        x = xs[n]
        total = np.zeros_like(x)
        count = np.zeros_like(x)
        for m in table.sizes:
            if m == n:
                continue
            inside = (x >= xs[m][0]) & (x <= xs[m][-1])
            total[inside] += splines[m](x[inside])
            count[inside] += 1
        covered = count > 0
        deviations.append((ys[n][covered] - total[covered] / count[covered]) ** 2)
    pooled = np.concatenate([ys[n] for n in table.sizes])
    dev = np.concatenate(deviations)
    variance = float(pooled.var())
    if dev.size == 0 or variance == 0:
        quality = math.inf
    else:
        quality = float(dev.mean()) / variance
    return CollapseDataset(lambda_c, alpha, nu, xs, ys, quality)


# ---------------------------------------------------------------------------
# Correlation length from a density tail
# ---------------------------------------------------------------------------


def fit_tail_length(r: Sequence[float], density: Sequence[float]) -> float:
    """ξ from a least-squares fit of ln P(r) = c - r/ξ."""
    r = np.asarray(r, dtype=float)
    p = np.asarray(density, dtype=float)
    if r.size < 2 or r.shape != p.shape:
        raise ParameterError("need at least two (r, P) samples of equal length")
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise DomainError("density samples must be positive and finite")
    slope = np.polyfit(r, np.log(p), 1)[0]
    if slope >= 0:
        raise DomainError(f"density is not decaying (slope {slope})")
    return -1.0 / float(slope)
