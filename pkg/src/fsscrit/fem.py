"""Radial finite elements for the ℓ = 0 Hulthén problem.

The unknown is the radial function ψ(r) (not rψ); all integrals carry the r²
measure, so no condition is imposed at the origin. Beyond the cutoff r_c the
solution is continued as ψ(r_c) e^{-(r - r_c)} (the infinite element), which
acts as the outer boundary condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .hulthen import hulthen_shape
from .numerics import (
    GroundPoint,
    banded_matvec,
    banded_to_dense,
    gauss_laguerre,
    gauss_legendre,
    lowest_banded_generalized,
    shape_functions,
)

ORDERS = ("linear", "hermite-quintic")
# 4 points integrate the linear-element blocks exactly; quintic products
# weighted by r² reach degree 12 and need 7.
DEFAULT_QUADRATURE = {"linear": 4, "hermite-quintic": 7}
TAIL_RULE = 50


@dataclass(frozen=True)
class Mesh:
    r_c: float
    h: float
    elements: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.elements:
            raise ParameterError("mesh has no elements")
        ordered = sorted(self.elements)
        if ordered[0][0] != 0.0 or ordered[-1][1] != self.r_c:
            raise ParameterError("elements must cover [0, r_c]")
        for (a0, b0), (a1, b1) in zip(ordered, ordered[1:]):
            if b0 != a1:
                raise ParameterError(f"elements not contiguous at r = {b0}")

    @property
    def count(self) -> int:
        return len(self.elements)

    @property
    def nodes(self) -> np.ndarray:
        ordered = sorted(self.elements)
        return np.array([a for a, _ in ordered] + [ordered[-1][1]])


def build_mesh(r_c: float, h: float) -> Mesh:
    if r_c <= 0 or h <= 0:
        raise ParameterError(f"r_c and h must be positive, got r_c={r_c}, h={h}")
    count = int(round(r_c / h))
    if count < 1 or abs(r_c / h - count) > 0.5:
        raise ParameterError(f"r_c/h = {r_c / h} does not give a whole element count")
    nodes = [i * (r_c / count) for i in range(count)] + [float(r_c)]
    return Mesh(float(r_c), float(h), tuple(zip(nodes[:-1], nodes[1:])))


def mesh_for_size(elements: int, h: float = 0.5) -> Mesh:
    """Mesh with a fixed element length; the cutoff grows with the count."""
    return build_mesh(elements * h, h)


@dataclass(frozen=True)
class LocalMatrices:
    kinetic: np.ndarray
    potential: np.ndarray
    overlap: np.ndarray


def _physical_shapes(order: str, xi: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    shapes = shape_functions(order)
    vals = shapes.evaluate(xi)
    ders = shapes.evaluate(xi, derivatives=1) / h
    if order == "hermite-quintic":
        # slope and curvature DOFs are physical derivatives, so scale by h, h²
        scale = np.array([1.0, h, h * h, 1.0, h, h * h])[:, None]
        vals = vals * scale
        ders = ders * scale
    return vals, ders


def element_matrices(
    element: tuple[float, float], order: str, n_quad: int | None = None
) -> LocalMatrices:
    """Local kinetic, coupling-potential and overlap blocks on one element.

    kinetic   = ½∫ r² φ_a' φ_b' dr
    potential = ∫ r² φ_a φ_b (-e^{-r}/(1-e^{-r})) dr   (λ factored out)
    overlap   = ∫ r² φ_a φ_b dr
    """
    if order not in ORDERS:
        raise ParameterError(f"unknown element order {order!r}")
    a, b = element
    if not 0 <= a < b:
        raise ParameterError(f"invalid element [{a}, {b}]")
    h = b - a
    rule = gauss_legendre(n_quad or DEFAULT_QUADRATURE[order], 0.0, 1.0)
    r = a + h * rule.nodes
    vals, ders = _physical_shapes(order, rule.nodes, h)
    w = rule.weights * h * r * r
    return LocalMatrices(
        kinetic=0.5 * (ders * w) @ ders.T,
        potential=(vals * (w * hulthen_shape(r))) @ vals.T,
        overlap=(vals * w) @ vals.T,
    )


@dataclass(frozen=True)
class TailCorrection:
    kinetic: float
    potential: float
    overlap: float


def tail_correction(r_c: float, n_laguerre: int = TAIL_RULE) -> TailCorrection:
    """Integrals over [r_c, ∞) for ψ(r) = e^{-(r - r_c)} (unit value at r_c).

    overlap = ∫ r² e^{-2t} = r_c²/2 + r_c/2 + 1/4 with t = r - r_c; since
    ψ' = -ψ the kinetic integral is half of it. The potential integral is
    done with Gauss-Laguerre after substituting s = 2t.
    """
    if r_c <= 0:
        raise ParameterError(f"r_c must be positive, got {r_c}")
    overlap = 0.5 * r_c * r_c + 0.5 * r_c + 0.25
    q = gauss_laguerre(n_laguerre)
    r = r_c + 0.5 * q.nodes
    potential = 0.5 * float(np.dot(q.weights, r * r * hulthen_shape(r)))
    return TailCorrection(kinetic=0.5 * overlap, potential=potential, overlap=overlap)


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """Global FEM matrices in LAPACK upper banded storage.

    The Hermite slope and curvature DOFs of the last node are tied to its
    value (ψ' = -ψ, ψ'' = ψ) to match the exponential tail, so they do not
    appear as unknowns.
    """

    mesh: Mesh
    order: str
    kinetic: np.ndarray
    coupling_potential: np.ndarray
    overlap: np.ndarray
    dof_map: tuple[np.ndarray, ...]
    tail: TailCorrection | None
    n_quad: int

    @property
    def bandwidth(self) -> int:
        return self.kinetic.shape[0] - 1

    @property
    def n_dofs(self) -> int:
        return self.kinetic.shape[1]

    @property
    def size(self) -> int:
        return self.mesh.count

    def dense(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(kinetic, coupling_potential, overlap) as full matrices."""
        return tuple(banded_to_dense(m) for m in (self.kinetic, self.coupling_potential, self.overlap))

    def ground_point(self, lam: float) -> GroundPoint:
        return ground_point(self, lam)

    def wavefunction(self, coefficients: np.ndarray, r) -> np.ndarray:
        """Evaluate ψ(r) for a global coefficient vector, including the tail."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        nodes = self.mesh.nodes
        inside = r <= self.mesh.r_c
        elem = np.clip(np.searchsorted(nodes, r[inside], side="right") - 1, 0, self.size - 1)
        for e in np.unique(elem):
            sel = np.flatnonzero(inside)[elem == e]
            a, b = nodes[e], nodes[e + 1]
            vals, _ = _physical_shapes(self.order, (r[sel] - a) / (b - a), b - a)
            vals = _tie_last(vals.T, self.order, e == self.size - 1).T
            out[sel] = coefficients[self.dof_map[e]] @ vals
        last_value = coefficients[self.dof_map[-1][-1]]
        out[~inside] = last_value * np.exp(-(r[~inside] - self.mesh.r_c))
        return out


def _local_dofs(order: str, element: int, last: bool) -> np.ndarray:
    if order == "linear":
        return np.array([element, element + 1])
    base = 3 * element
    if last:
        return np.array([base, base + 1, base + 2, base + 3])
    return np.arange(base, base + 6)


def _tie_last(block_rows: np.ndarray, order: str, last: bool) -> np.ndarray:
    """Collapse the right-node Hermite columns onto its value DOF: v - s + c."""
    if order == "linear" or not last:
        return block_rows
    tied = block_rows[..., 3] - block_rows[..., 4] + block_rows[..., 5]
    return np.concatenate([block_rows[..., :3], tied[..., None]], axis=-1)


def _tie_block(mat: np.ndarray, order: str, last: bool) -> np.ndarray:
    if order == "linear" or not last:
        return mat
    t = np.zeros((6, 4))
    t[:3, :3] = np.eye(3)
    t[3:, 3] = [1.0, -1.0, 1.0]
    return t.T @ mat @ t


def assemble(
    mesh: Mesh, order: str, n_quad: int | None = None, tail: bool = True
) -> AssembledSystem:
    """Sum element blocks into banded global matrices.

    Elements are reduced in ascending position regardless of the order they
    are listed in the mesh, so the result is bit-identical for any listing.
    """
    if order not in ORDERS:
        raise ParameterError(f"unknown element order {order!r}")
    if mesh.count == 0:
        raise ParameterError("cannot assemble an empty mesh")
    n_quad = n_quad or DEFAULT_QUADRATURE[order]
    listed = list(mesh.elements)
    locals_ = [element_matrices(el, order, n_quad) for el in listed]
    position = np.argsort([a for a, _ in listed], kind="stable")
    M = mesh.count
    if order == "linear":
        kd, n = 1, M + 1
    else:
        kd, n = 5, 3 * M + 1
    mats = [np.zeros((kd + 1, n)) for _ in range(3)]
    dof_map = []
    for e, src in enumerate(position):
        last = e == M - 1
        dofs = _local_dofs(order, e, last)
        dof_map.append(dofs)
        blocks = (locals_[src].kinetic, locals_[src].potential, locals_[src].overlap)
        for glob, block in zip(mats, blocks):
            block = _tie_block(block, order, last)
            for j, gj in enumerate(dofs):
                for i, gi in enumerate(dofs[: j + 1]):
                    glob[kd + gi - gj, gj] += block[i, j]
    correction = None
    if tail:
        correction = tail_correction(mesh.r_c)
        end = n - 1
        mats[0][kd, end] += correction.kinetic
        mats[1][kd, end] += correction.potential
        mats[2][kd, end] += correction.overlap
    for mat in mats:
        mat.setflags(write=False)
    return AssembledSystem(
        mesh=mesh,
        order=order,
        kinetic=mats[0],
        coupling_potential=mats[1],
        overlap=mats[2],
        dof_map=tuple(dof_map),
        tail=correction,
        n_quad=n_quad,
    )


def build_system(elements: int, order: str, h: float = 0.5, n_quad: int | None = None) -> AssembledSystem:
    return assemble(mesh_for_size(elements, h), order, n_quad)


def ground_point(system: AssembledSystem, lam: float) -> GroundPoint:
    if lam < 0:
        raise ParameterError(f"coupling must be non-negative, got {lam}")
    H = system.kinetic + lam * system.coupling_potential
    energy, c = lowest_banded_generalized(H, system.overlap)
    if c[0] < 0:
        c = -c
    return GroundPoint(
        lam=float(lam),
        size=system.size,
        energy=energy,
        dv_expectation=float(c @ banded_matvec(system.coupling_potential, c)),
        coefficients=c,
    )

