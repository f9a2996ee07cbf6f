"""Mimetic finite differences for the mixed Poisson problem (dual form).

Unknowns are one value ``u_K`` per cell and one flux ``p_e`` per face in the
face's canonical direction, so the continuity relation
``p_{K1,e} + p_{K2,e} = 0`` holds structurally and ``dim W_h = #faces``.

With ``D = diag(|K|)``, the weighted divergence ``B = D div_h`` and the flux
Gram matrix ``M``, the discrete problem reads

    M p + B^T u = 0,      B p = -D (I f),

and the discrete flux operator is ``F_h u = -M^{-1} B^T u`` (minus the
adjoint of ``div_h``). ``F_h`` is applied through a solve, never formed.

Two families of cell inner products are provided:

``"rt0"``
    ``int_K alpha^{-1} R(p).R(q)`` with the lowest-order face lifting ``R``
    on intervals, triangles and rectangles, integrated exactly.
``"diagonal"``
    ``sum_e alpha_K^{-1} p_e q_e |e| d_{K,e}`` on admissible meshes with
    scalar ``alpha``; reproduces two-point flux finite volumes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sps

from .functional import DiscreteFunctional, Space
from .fv import fv_interpolate
from .linalg import SaddleSystem, SparseMatrix, cg, saddle_solve
from .mesh import CenteredMesh, MeshError, PolyMesh, build_centered_mesh
from .problem import Diffusivity, ScalarField
from .quadrature import interval_rule, polygon_rule, segment_rule, triangle_rule

MODES = ("rt0", "diagonal")


def _poly(mesh) -> PolyMesh:
    return mesh.base if isinstance(mesh, CenteredMesh) else mesh


def _centered(mesh) -> CenteredMesh:
    return mesh if isinstance(mesh, CenteredMesh) else build_centered_mesh(mesh)


# {{{ divergence and interpolation


def divergence_matrix(mesh) -> SparseMatrix:
    """Weighted divergence ``B[K, e] = s_{K,e} |e|`` so that ``B p = D div_h p``."""
    m = _poly(mesh)
    rows, cols, vals = [], [], []
    for K, (faces, signs) in enumerate(zip(m.cell_faces, m.cell_signs)):
        rows += [K] * len(faces)
        cols += faces.tolist()
        vals += (signs * m.face_measures[faces]).tolist()
    return SparseMatrix.from_triplets(rows, cols, vals, (m.n_cells, m.n_faces))


def mfd_div(mesh, p: np.ndarray) -> np.ndarray:
    """``(div_h p)_K = (1/|K|) sum_e p_{K,e} |e|``."""
    m = _poly(mesh)
    return (divergence_matrix(m) @ np.asarray(p, dtype=float)) / m.cell_measures


def mfd_interpolate_flux(q: Callable[[np.ndarray], np.ndarray], mesh, quad: int = 1) -> np.ndarray:
    """Face averages of the normal component, ``(1/|e|) int_e q.n_e``, canonical direction.

    ``quad`` Gauss points per face (``quad=1`` is the midpoint rule, exact
    for affine ``q``).
    """
    m = _poly(mesh)
    out = np.empty(m.n_faces)
    for e in range(m.n_faces):
        n = m.face_normals[e]
        if m.dim == 1:
            out[e] = float(np.asarray(q(m.face_centers[e][None, :]))[0] @ n)
            continue
        a, b = (m.vertices[v] for v in m.face_vertices[e])
        pts, w = segment_rule(a, b, quad)
        out[e] = np.sum(w * (np.asarray(q(pts)) @ n)) / m.face_measures[e]
    return out


def div_commutation_defect(q, div_q: ScalarField, mesh, quad: int = 1, cell_quad: int = 1) -> float:
    """``max_K |I(div q)_K - div_h(I q)_K|``."""
    lhs = fv_interpolate(div_q, _poly(mesh), cell_quad)
    rhs = mfd_div(mesh, mfd_interpolate_flux(q, mesh, quad))
    return float(np.abs(lhs - rhs).max())


# }}}


# {{{ lifting and cell inner products


def _cell_kind(m: PolyMesh, K: int) -> str:
    if m.dim == 1 or len(m.cells[K]) == 3:
        return "simplex"
    if len(m.cells[K]) == 4:
        n = m.face_normals[m.cell_faces[K]]
        dots = np.abs(n @ n.T)
        # each face normal is parallel to exactly one other (its opposite)
        if np.all(np.isclose(dots, 0.0, atol=1e-12) | np.isclose(dots, 1.0, atol=1e-12)):
            return "rectangle"
    raise MeshError(f"cell {K} has an unsupported shape for the rt0 lifting (intervals, triangles, rectangles)")


@dataclass(frozen=True)
class CellLifting:
    """Lowest-order lifting on one cell: ``R(phi)(x) = sum_i phi_i (a_i + b_i x)``.

    ``phi`` are the local outward face values, ordered as ``mesh.cell_faces[K]``.
    """

    offsets: np.ndarray  # (n_local, d)
    slopes: np.ndarray  # (n_local, d, d)

    def basis(self, x: np.ndarray) -> np.ndarray:
        """Basis fields at points ``x`` (n_pts, d) -> (n_local, n_pts, d)."""
        return self.offsets[:, None, :] + np.einsum("ikl,pl->ipk", self.slopes, x)

    def __call__(self, phi: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.einsum("i,ipk->pk", np.asarray(phi, dtype=float), self.basis(x))


def cell_lifting(mesh, K: int) -> CellLifting:
    m = _poly(mesh)
    kind = _cell_kind(m, K)
    faces = m.cell_faces[K]
    d = m.dim
    offsets = np.empty((len(faces), d))
    slopes = np.empty((len(faces), d, d))
    for i, e in enumerate(faces):
        n = m.outward_normal(K, e)
        if kind == "simplex":
            # |e| / (d |K|) (x - x_a), x_a the vertex opposite to e
            a = next(v for v in m.cells[K] if v not in m.face_vertices[e])
            c = m.face_measures[e] / (d * m.cell_measures[K])
            slopes[i] = c * np.eye(d)
            offsets[i] = -c * m.vertices[a]
        else:
            # ((x - x_opp).n / w) n, x_opp on the opposite face
            opp = next(f for f in faces if np.allclose(m.outward_normal(K, f), -n, atol=1e-12))
            x_opp = m.face_centers[opp]
            w = float((m.face_centers[e] - x_opp) @ n)
            slopes[i] = np.outer(n, n) / w
            offsets[i] = -(x_opp @ n) / w * n
    return CellLifting(offsets, slopes)


def _cell_quadrature(m: PolyMesh, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule exact for the quadratic integrands of the lifted inner product."""
    v = m.cell_vertices(K)
    if m.dim == 1:
        return interval_rule(v[0, 0], v[1, 0], 2)
    if len(v) == 3:
        return triangle_rule(v, 2)
    return polygon_rule(v, m.cell_centroids[K], 2)


@dataclass(frozen=True, eq=False)
class CellInnerProduct:
    """Cell matrices ``[.,.]_K`` over outward local face values and the global Gram matrix."""

    mesh: CenteredMesh
    mode: str
    alpha_inv: np.ndarray  # (n_cells, d, d), sampled at cell centers
    cell_matrices: tuple[np.ndarray, ...]
    gram: SparseMatrix

    def inner(self, p: np.ndarray, q: np.ndarray) -> float:
        return float(p @ (self.gram @ q))

    def local(self, K: int, p: np.ndarray) -> np.ndarray:
        """Outward values ``p_{K,e}`` of a global flux vector on the faces of ``K``."""
        return self.mesh.cell_signs[K] * np.asarray(p)[self.mesh.cell_faces[K]]

    def lifting(self, K: int) -> CellLifting:
        if self.mode != "rt0":
            raise ValueError("only the rt0 inner product is defined through an explicit lifting")
        return cell_lifting(self.mesh, K)


def build_inner_product(mesh, alpha: Diffusivity, mode: str = "rt0") -> CellInnerProduct:
    """Assemble the flux inner product.

    ``alpha`` is sampled at the cell centers. The rt0 mode integrates
    ``alpha^{-1} R(p).R(q)`` exactly; the diagonal mode requires an admissible
    mesh and a scalar ``alpha``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown inner-product mode {mode!r}; choose from {MODES}")
    cm = _centered(mesh)
    m = cm.base
    if alpha.d != m.dim:
        raise ValueError(f"diffusivity dimension {alpha.d} does not match mesh dimension {m.dim}")
    if mode == "diagonal":
        if not alpha.scalar:
            raise ValueError("the diagonal inner product needs a scalar diffusivity")
        if not cm.admissible:
            raise MeshError(f"the diagonal inner product needs an admissible mesh\n{cm.report}")
    A_inv = np.linalg.inv(np.asarray(alpha.matrix(cm.cell_centers), dtype=float))

    mats = []
    rows, cols, vals = [], [], []
    for K in range(m.n_cells):
        faces, signs = m.cell_faces[K], m.cell_signs[K]
        if mode == "rt0":
            pts, w = _cell_quadrature(m, K)
            psi = cell_lifting(m, K).basis(pts)
            MK = np.einsum("p,ipk,kl,jpl->ij", w, psi, A_inv[K], psi)
            MK = 0.5 * (MK + MK.T)
        else:
            MK = np.diag(A_inv[K][0, 0] * m.face_measures[faces] * cm.cell_face_distances[K])
        mats.append(MK)
        S = np.outer(signs, signs) * MK
        rows += np.repeat(faces, len(faces)).tolist()
        cols += np.tile(faces, len(faces)).tolist()
        vals += S.ravel().tolist()
    gram = SparseMatrix.from_triplets(rows, cols, vals, (m.n_faces, m.n_faces), symmetric=True)
    return CellInnerProduct(cm, mode, A_inv, tuple(mats), gram)


@dataclass(frozen=True)
class ConsistencyDefects:
    """Maximum per-cell defects of the lifting consistency conditions.

    ``normal_trace``, ``divergence`` and ``constants`` are the three pointwise
    lifting conditions (rt0 only, NaN otherwise). ``moments`` checks
    ``[I c, q]_K = alpha^{-1} c . sum_e q_{K,e} |e| (x_e - x_K)``, the
    integrated consequence of the first two; ``energy`` checks
    ``[I c, I c']_K = |K| c.alpha^{-1} c'``.
    """

    normal_trace: float
    divergence: float
    constants: float
    moments: float
    energy: float

    def max(self) -> float:
        return float(np.nanmax([self.normal_trace, self.divergence, self.constants, self.moments, self.energy]))


def lifting_consistency(ip: CellInnerProduct, n_random: int = 3, seed: int = 0) -> ConsistencyDefects:
    """Check the consistency conditions cell by cell, relative to the cell's scale."""
    m = ip.mesh.base
    d = m.dim
    rng = np.random.default_rng(seed)
    cs = np.vstack([np.eye(d), rng.uniform(-1.0, 1.0, size=(n_random, d))])
    nt = dv = cc = mo = en = 0.0
    for K in range(m.n_cells):
        faces = m.cell_faces[K]
        normals = np.array([m.outward_normal(K, e) for e in faces])
        MK = ip.cell_matrices[K]
        Ainv = ip.alpha_inv[K]
        diam = float(np.ptp(m.cell_vertices(K), axis=0).max())
        rel_x = m.face_centers[faces] - m.cell_centroids[K]
        mscale = np.abs(MK).max()

        for c in cs:
            Ic = normals @ c  # outward face values of the constant field
            # moment identity, tested against every unit local flux
            lhs = Ic @ MK
            rhs = (Ainv @ c) @ (rel_x * m.face_measures[faces][:, None]).T
            mo = max(mo, np.abs(lhs - rhs).max() / (mscale * (1 + np.abs(c).max())))
            for c2 in cs:
                e_lhs = Ic @ MK @ (normals @ c2)
                e_rhs = m.cell_measures[K] * c @ Ainv @ c2
                en = max(en, abs(e_lhs - e_rhs) / (m.cell_measures[K] * np.abs(Ainv).max()))

        if ip.mode != "rt0":
            continue
        lift = cell_lifting(m, K)
        pts, _ = _cell_quadrature(m, K)
        # normal traces at two Gauss points per face
        for i, e in enumerate(faces):
            if d == 1:
                fpts = m.face_centers[e][None, :]
            else:
                a, b = (m.vertices[v] for v in m.face_vertices[e])
                fpts, _ = segment_rule(a, b, 2)
            tr = lift.basis(fpts) @ normals[i]  # (n_local, n_pts)
            target = np.zeros(len(faces))
            target[i] = 1.0
            nt = max(nt, np.abs(tr - target[:, None]).max())
        # divergence by central differences (the lifting is affine)
        step = 1e-3 * diam
        div_num = np.zeros((len(faces), len(pts)))
        for k in range(d):
            dx = np.zeros(d)
            dx[k] = step
            div_num += (lift.basis(pts + dx)[..., k] - lift.basis(pts - dx)[..., k]) / (2 * step)
        div_K = m.face_measures[faces] / m.cell_measures[K]
        dv = max(dv, np.abs(div_num - div_K[:, None]).max() / np.abs(div_K).max())
        for c in cs:
            cc = max(cc, np.abs(lift(normals @ c, pts) - c).max() / (1 + np.abs(c).max()))
    nan = float("nan")
    if ip.mode != "rt0":
        nt = dv = cc = nan
    return ConsistencyDefects(nt, dv, cc, float(mo), float(en))


# }}}


# {{{ discrete mixed problem


@dataclass(frozen=True, eq=False)
class MFDDiscretization:
    mesh: CenteredMesh
    ip: CellInnerProduct
    B: SparseMatrix
    If: np.ndarray

    @property
    def M(self) -> SparseMatrix:
        return self.ip.gram

    @property
    def measures(self) -> np.ndarray:
        return self.mesh.cell_measures

    @property
    def n_cells(self) -> int:
        return self.mesh.n_cells

    @property
    def n_faces(self) -> int:
        return self.mesh.n_faces

    def system(self) -> SaddleSystem:
        return SaddleSystem(self.M, self.B, np.zeros(self.n_faces), -self.measures * self.If)

    def space(self) -> Space:
        return Space("mfd-mixed", self.n_cells + self.n_faces,
                     blocks=(("u", self.n_cells), ("p", self.n_faces)))

    def inner_M(self, u: np.ndarray, v: np.ndarray) -> float:
        """``[u, v]_{M_h} = sum_K u_K v_K |K|``."""
        return float(np.sum(u * v * self.measures))

    def flux_operator(self, u: np.ndarray, tol: float = 1e-15) -> np.ndarray:
        """``F_h u``, the solution of ``M x = -B^T u``."""
        rhs = -(self.B.T @ np.asarray(u, dtype=float))
        if self.M.is_diagonal():
            return rhs / self.M.diagonal()
        return cg(self.M, rhs, tol=tol, diag=self.M.diagonal(), block="M").x


def mfd_discretize(mesh, alpha: Diffusivity, f: ScalarField, mode: str = "rt0", quad: int = 1) -> MFDDiscretization:
    cm = _centered(mesh)
    ip = build_inner_product(cm, alpha, mode)
    return MFDDiscretization(cm, ip, divergence_matrix(cm), fv_interpolate(f, cm.base, quad))


def mfd_assemble(mesh, alpha: Diffusivity, f: ScalarField, mode: str = "rt0", quad: int = 1) -> SaddleSystem:
    """Saddle system ``[[M, B^T], [B, 0]] (p, u) = (0, -D I f)``."""
    return mfd_discretize(mesh, alpha, f, mode, quad).system()


@dataclass(frozen=True, eq=False)
class MixedState:
    mesh: CenteredMesh
    u: np.ndarray
    p: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.u, self.p])


def mfd_solve(mesh, alpha: Diffusivity, f: ScalarField, mode: str = "rt0", tol: float = 1e-12,
              quad: int = 1) -> MixedState:
    disc = mesh if isinstance(mesh, MFDDiscretization) else mfd_discretize(mesh, alpha, f, mode, quad)
    p, u = saddle_solve(disc.system(), tol=tol)
    return MixedState(disc.mesh, u, p)


def adjointness_defect(disc: MFDDiscretization, u: np.ndarray, q: np.ndarray) -> float:
    """Relative defect of ``[F_h u, q]_{W_h} = -[u, div_h q]_{M_h}``."""
    Fu = disc.flux_operator(u)
    a = disc.ip.inner(Fu, q)
    b = disc.inner_M(u, mfd_div(disc.mesh, q))
    scale = abs(a) + abs(b)
    return float(abs(a + b) / scale) if scale > 0.0 else 0.0


def mfd_hamiltonian(disc: MFDDiscretization) -> DiscreteFunctional:
    """``H_h(u, p) = [p, F_h u]_W - 1/2 [p, p]_W - [u, I f]_M`` on stacked ``(u, p)``.

    ``[p, F_h u]_W`` is evaluated as ``-[u, div_h p]_M`` (adjointness), so
    ``H_h = -u.B p - 1/2 p.M p - u.D If``.
    """
    space = disc.space()
    nc = disc.n_cells
    B, M = disc.B, disc.M
    load = disc.measures * disc.If

    def value(x):
        u, p = x[:nc], x[nc:]
        return float(-u @ (B @ p) - 0.5 * p @ (M @ p) - u @ load)

    def gradient(x):
        u, p = x[:nc], x[nc:]
        return np.concatenate([-(B @ p) - load, -(B.T @ u) - M @ p])

    def hessian():
        H = sps.bmat([[None, -B.csr], [-B.csr.T, -M.csr]], format="csr")
        H = sps.csr_matrix(H, shape=(space.size, space.size))
        return SparseMatrix.from_scipy(H, symmetric=True)

    return DiscreteFunctional(space, value, gradient, quadratic=True, convex=False, hessian=hessian)


def mfd_residual(disc: MFDDiscretization, x: np.ndarray) -> np.ndarray:
    """Strong-form residual ``(div_h p + I f, p - F_h u)`` of the differential embedding."""
    nc = disc.n_cells
    u, p = x[:nc], x[nc:]
    return np.concatenate([mfd_div(disc.mesh, p) + disc.If, p - disc.flux_operator(u)])


def mfd_coherence_mass(disc: MFDDiscretization) -> SparseMatrix:
    """Block scaling ``diag(-D, -M)`` taking the residual to the Hamiltonian gradient."""
    D = sps.diags(disc.measures)
    return SparseMatrix.from_scipy(sps.block_diag([-D, -disc.M.csr], format="csr"), symmetric=True)


# }}}


def write_mixed_csv(cells_path: str | Path, faces_path: str | Path, state: MixedState) -> None:
    with open(cells_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell_id", "u"])
        for K, val in enumerate(state.u):
            w.writerow([K, repr(float(val))])
    with open(faces_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["face_id", "flux"])
        for e, val in enumerate(state.p):
            w.writerow([e, repr(float(val))])
