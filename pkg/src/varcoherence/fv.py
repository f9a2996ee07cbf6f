"""Two-point flux finite volumes for the isotropic Poisson problem.

Fluxes are stored per (face, incident cell): column 0 is the value seen from
the face's owning cell ``K1`` (canonical normal), column 1 from ``K2`` (NaN
on boundary faces). Fluxes built from cell values are continuous by
construction; a hand-made distribution may not be.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .functional import DiscreteFunctional, Space
from .linalg import SparseMatrix, cg_solve
from .mesh import CenteredMesh, PolyMesh, require_admissible
from .problem import ScalarField
from .quadrature import interval_rule, polygon_rule


def _poly(mesh) -> PolyMesh:
    return mesh.base if isinstance(mesh, CenteredMesh) else mesh


# {{{ interpolation


def fv_interpolate(f: ScalarField, mesh, quad: int = 1) -> np.ndarray:
    """Cell averages ``(1/|K|) int_K f``.

    ``quad=1`` evaluates ``f`` at the centroid (exact for affine ``f``);
    ``quad > 1`` refines: Gauss rule on intervals, centroid-fan subdivision
    with collapsed Gauss rules on polygons.
    """
    m = _poly(mesh)
    if quad == 1:
        return np.asarray(f(m.cell_centroids), dtype=float) * np.ones(m.n_cells)
    out = np.empty(m.n_cells)
    for K in range(m.n_cells):
        v = m.cell_vertices(K)
        if m.dim == 1:
            pts, w = interval_rule(v[0, 0], v[1, 0], quad)
        else:
            pts, w = polygon_rule(v, m.cell_centroids[K], quad)
        out[K] = np.sum(w * f(pts)) / m.cell_measures[K]
    return out


# }}}


# {{{ fluxes


@dataclass(frozen=True, eq=False)
class FluxDistribution:
    mesh: PolyMesh
    values: np.ndarray  # (n_faces, 2)

    @classmethod
    def from_canonical(cls, mesh, phi: np.ndarray) -> FluxDistribution:
        m = _poly(mesh)
        phi = np.asarray(phi, dtype=float)
        vals = np.column_stack([phi, np.where(m.face_cells[:, 1] >= 0, -phi, np.nan)])
        return cls(m, vals)

    @property
    def continuous(self) -> bool:
        internal = self.mesh.internal_faces
        return bool(np.all(self.values[internal, 0] + self.values[internal, 1] == 0.0))

    def value(self, e: int, K: int) -> float:
        side = 0 if self.mesh.face_cells[e, 0] == K else 1
        return float(self.values[e, side])

    def magnitudes(self) -> np.ndarray:
        """``phi_e = |phi_{e,K}|``."""
        return np.abs(self.values[:, 0])


def fv_fluxes(mesh: PolyMesh | CenteredMesh, u: np.ndarray) -> FluxDistribution:
    """Two-point fluxes: ``(u_K2 - u_K1)/d_e`` inside, ``-u_K/d_e`` on the boundary."""
    cm = require_admissible(mesh)
    u = np.asarray(u, dtype=float)
    K1, K2 = cm.face_cells[:, 0], cm.face_cells[:, 1]
    u2 = np.where(K2 >= 0, u[np.maximum(K2, 0)], 0.0)
    return FluxDistribution.from_canonical(cm.base, (u2 - u[K1]) / cm.face_distances)


def fv_div(F: FluxDistribution) -> np.ndarray:
    """Flux balance ``(1/|K|) sum_{e in dK} F_{e,K} |e|``."""
    m = F.mesh
    out = np.zeros(m.n_cells)
    K1, K2 = m.face_cells[:, 0], m.face_cells[:, 1]
    np.add.at(out, K1, F.values[:, 0] * m.face_measures)
    internal = K2 >= 0
    np.add.at(out, K2[internal], F.values[internal, 1] * m.face_measures[internal])
    return out / m.cell_measures


def fv_laplacian(mesh: PolyMesh | CenteredMesh, u: np.ndarray) -> np.ndarray:
    return fv_div(fv_fluxes(mesh, u))


def fv_green_gauss_defect(mesh: PolyMesh | CenteredMesh, F: FluxDistribution, u: np.ndarray,
                          check_continuity: bool = True, relative: bool = True) -> float:
    """Defect of the finite-volume Green-Gauss formula for a flux distribution.

    ``sum_K (div_K F) u_K |K| = -sum_{e=K1|K2} F_{e,K1} (u_K2 - u_K1)/d_e d_e |e|
    + sum_{e=K|boundary} F_{e,K} u_K |e|``.

    The identity needs continuity; ``check_continuity=False`` evaluates it
    anyway (negative controls).
    """
    if check_continuity and not F.continuous:
        raise ValueError("flux distribution does not satisfy the continuity relation")
    cm = mesh if isinstance(mesh, CenteredMesh) else require_admissible(mesh)
    m = cm.base
    u = np.asarray(u, dtype=float)
    lhs = fv_div(F) * u * m.cell_measures
    internal, boundary = m.internal_faces, m.boundary_faces
    K1, K2 = m.face_cells[internal, 0], m.face_cells[internal, 1]
    d_e = cm.face_distances[internal]
    t_int = F.values[internal, 0] * (u[K2] - u[K1]) / d_e * d_e * m.face_measures[internal]
    t_bnd = F.values[boundary, 0] * u[m.face_cells[boundary, 0]] * m.face_measures[boundary]
    defect = abs(lhs.sum() + t_int.sum() - t_bnd.sum())
    if not relative:
        return float(defect)
    scale = np.abs(lhs).sum() + np.abs(t_int).sum() + np.abs(t_bnd).sum()
    return float(defect / scale) if scale > 0.0 else float(defect)


# }}}


# {{{ variational embedding


def transmissibility_matrix(mesh: PolyMesh | CenteredMesh) -> SparseMatrix:
    """Hessian of the flux energy ``1/2 sum_e phi_e^2 |e| d_e``."""
    cm = require_admissible(mesh)
    m = cm.base
    t = m.face_measures / cm.face_distances
    rows, cols, vals = [], [], []
    for e in range(m.n_faces):
        K1, K2 = m.face_cells[e]
        rows.append(K1), cols.append(K1), vals.append(t[e])
        if K2 >= 0:
            rows += [K2, K1, K2]
            cols += [K2, K2, K1]
            vals += [t[e], -t[e], -t[e]]
    return SparseMatrix.from_triplets(rows, cols, vals, (m.n_cells, m.n_cells), symmetric=True)


def fv_lagrangian(f: ScalarField, mesh: PolyMesh | CenteredMesh, quad: int = 1) -> DiscreteFunctional:
    """``L_h(u) = 1/2 sum_e phi_e^2 |e| d_e - sum_K (I f)_K u_K |K|`` over all faces.

    Boundary faces are included; they carry the Dirichlet condition.
    """
    cm = require_admissible(mesh)
    m = cm.base
    If = fv_interpolate(f, m, quad)
    load = If * m.cell_measures
    K1, K2 = m.face_cells[:, 0], m.face_cells[:, 1]
    internal = K2 >= 0
    t = m.face_measures / cm.face_distances

    def value(u):
        phi = fv_fluxes(cm, u).values[:, 0]
        return float(0.5 * np.sum(phi**2 * m.face_measures * cm.face_distances) - load @ u)

    def gradient(u):
        jump = u[K1] - np.where(internal, u[np.maximum(K2, 0)], 0.0)
        g = -load.copy()
        np.add.at(g, K1, t * jump)
        np.add.at(g, K2[internal], -t[internal] * jump[internal])
        return g

    return DiscreteFunctional(Space("fv-cell", m.n_cells), value, gradient, quadratic=True,
                              convex=True, hessian=lambda: transmissibility_matrix(cm))


def fv_solve(f: ScalarField, mesh: PolyMesh | CenteredMesh, tol: float = 1e-12, quad: int = 1) -> np.ndarray:
    """Solve ``-Delta_h u = I f`` (scaled by ``|K|``) by CG on the TPFA matrix."""
    cm = require_admissible(mesh)
    A = transmissibility_matrix(cm)
    b = fv_interpolate(f, cm.base, quad) * cm.cell_measures
    return cg_solve(A, b, tol=tol)


# }}}


def write_cell_csv(path: str | Path, mesh, u: np.ndarray, centers: np.ndarray | None = None) -> None:
    """Columns ``cell_id, x1..xd, u``; ``centers`` default to the mesh cell centers."""
    if centers is None:
        centers = mesh.cell_centers if isinstance(mesh, CenteredMesh) else mesh.cell_centroids
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell_id"] + [f"x{i + 1}" for i in range(centers.shape[1])] + ["u"])
        for K, x in enumerate(centers):
            w.writerow([K, *[repr(float(c)) for c in x], repr(float(u[K]))])
