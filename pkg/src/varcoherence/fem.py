"""Conforming P1 finite elements on intervals and triangles.

The weak residual and the restricted Lagrangian share one per-cell
quadrature rule (``quad`` points per direction; ``quad=1`` is the barycenter
rule). Coherence at the identity level holds for any rule as long as both
embeddings use the same one.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sps

from .functional import DiscreteFunctional, Space, find_extremal
from .linalg import SparseMatrix, cg_solve
from .mesh import MeshError, PolyMesh
from .problem import LagrangianFn
from .quadrature import interval_rule, triangle_rule


@dataclass(frozen=True, eq=False)
class P1Space:
    """Nodal P1 space on a simplicial mesh, with precomputed quadrature data.

    Attributes
    ----------
    conn : (n_cells, d + 1) vertex indices
    grads : (n_cells, d + 1, d) shape-function gradients (constant per cell)
    qx, qw, qcell : quadrature points, weights and owning cell
    qphi : (n_q, d + 1) shape-function values at the quadrature points
    """

    mesh: PolyMesh
    quad: int
    conn: np.ndarray
    grads: np.ndarray
    qx: np.ndarray
    qw: np.ndarray
    qcell: np.ndarray
    qphi: np.ndarray
    free: np.ndarray

    @property
    def d(self) -> int:
        return self.mesh.dim

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_vertices

    @property
    def nodes(self) -> np.ndarray:
        return self.mesh.vertices

    def space(self) -> Space:
        return Space("fem-nodal", self.n_nodes, free=self.free)

    def evaluate(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Values of ``u_h`` at quadrature points and its gradient there."""
        u = np.asarray(u, dtype=float)
        uc = u[self.conn]
        vals = np.einsum("qa,qa->q", self.qphi, uc[self.qcell])
        grad_cell = np.einsum("ca,cak->ck", uc, self.grads)
        return vals, grad_cell[self.qcell]

    def evaluation_matrices(self) -> tuple[sps.csr_matrix, sps.csr_matrix]:
        """Sparse maps from nodal values to ``u_h(x_q)`` and to ``grad u_h(x_q)`` (rows ``q * d + k``)."""
        nq, d = len(self.qw), self.d
        nodes = self.conn[self.qcell]
        rows = np.repeat(np.arange(nq), d + 1)
        Phi = sps.csr_matrix((self.qphi.ravel(), (rows, nodes.ravel())), shape=(nq, self.n_nodes))
        g = self.grads[self.qcell]  # (nq, d+1, d)
        grow = (np.arange(nq)[:, None, None] * d + np.arange(d)[None, None, :]) * np.ones((1, d + 1, 1), dtype=int)
        gcol = np.broadcast_to(nodes[:, :, None], g.shape)
        G = sps.csr_matrix((g.ravel(), (grow.ravel(), gcol.ravel())), shape=(nq * d, self.n_nodes))
        return Phi, G


def build_p1_space(mesh: PolyMesh, quad: int = 1) -> P1Space:
    if not mesh.is_simplicial():
        raise MeshError("P1 elements need a simplicial mesh (intervals or triangles)")
    d = mesh.dim
    conn = np.array(mesh.cells, dtype=int)
    grads = np.empty((mesh.n_cells, d + 1, d))
    qx, qw, qcell, qphi = [], [], [], []
    for K, c in enumerate(conn):
        v = mesh.vertices[c]
        T = (v[1:] - v[0]).T
        Tinv = np.linalg.inv(T)
        grads[K, 1:] = Tinv
        grads[K, 0] = -Tinv.sum(axis=0)
        if d == 1:
            pts, w = interval_rule(v[0, 0], v[1, 0], quad)
        else:
            pts, w = triangle_rule(v, quad)
        lam = (Tinv @ (pts - v[0]).T).T
        qphi.append(np.column_stack([1.0 - lam.sum(axis=1), lam]))
        qx.append(pts)
        qw.append(w)
        qcell.append(np.full(len(w), K))
    return P1Space(
        mesh=mesh, quad=quad, conn=conn, grads=grads,
        qx=np.vstack(qx), qw=np.concatenate(qw), qcell=np.concatenate(qcell),
        qphi=np.vstack(qphi), free=~mesh.boundary_vertex_mask(),
    )


def fem_weak_residual(L: LagrangianFn, space: P1Space, u: np.ndarray) -> np.ndarray:
    """``r_a = int [dL/dy(x, u_h, grad u_h) phi_a + dL/dv(...) . grad phi_a]`` over free nodes.

    Assembled cell by cell with the shared quadrature; zero on boundary nodes.
    """
    vals, grads = space.evaluate(u)
    dLy = L.dL_dy(space.qx, vals, grads) * space.qw
    dLv = L.dL_dv(space.qx, vals, grads) * space.qw[:, None]
    r = np.zeros(space.n_nodes)
    for a in range(space.d + 1):
        contrib = dLy * space.qphi[:, a] + np.einsum("qk,qk->q", dLv, space.grads[space.qcell, a])
        np.add.at(r, space.conn[space.qcell, a], contrib)
    return np.where(space.free, r, 0.0)


def fem_lagrangian(L: LagrangianFn, space: P1Space) -> DiscreteFunctional:
    """Restriction of the Lagrangian functional to P1 functions, same quadrature.

    The gradient is the chain rule through the global evaluation matrices:
    ``Phi^T (w dL/dy) + G^T (w dL/dv)``.
    """
    Phi, G = space.evaluation_matrices()
    d = space.d

    def value(u):
        vals = Phi @ u
        grads = (G @ u).reshape(-1, d)
        return float(np.sum(space.qw * L.eval(space.qx, vals, grads)))

    def gradient(u):
        vals = Phi @ u
        grads = (G @ u).reshape(-1, d)
        gy = space.qw * L.dL_dy(space.qx, vals, grads)
        gv = space.qw[:, None] * L.dL_dv(space.qx, vals, grads)
        return Phi.T @ gy + G.T @ gv.ravel()

    hessian = None
    if L.poisson is not None:
        def hessian():
            K = stiffness_matrix(space, L).csr
            P = sps.diags(space.free.astype(float))
            return SparseMatrix.from_scipy(P @ K @ P, symmetric=True)

    return DiscreteFunctional(space.space(), value, gradient, quadratic=L.poisson is not None,
                              convex=L.convex, hessian=hessian)


def stiffness_matrix(space: P1Space, L: LagrangianFn) -> SparseMatrix:
    """``K_ab = sum_q w_q (alpha(x_q) grad phi_b) . grad phi_a`` over all nodes."""
    alpha = L.poisson.alpha
    d, nq = space.d, len(space.qw)
    A = alpha.matrix(space.qx) * space.qw[:, None, None]
    g = space.grads[space.qcell]  # (nq, d+1, d)
    local = np.einsum("qak,qkl,qbl->qab", g, A, g)
    nodes = space.conn[space.qcell]
    rows = np.broadcast_to(nodes[:, :, None], local.shape)
    cols = np.broadcast_to(nodes[:, None, :], local.shape)
    return SparseMatrix.from_triplets(rows.ravel(), cols.ravel(), local.ravel(),
                                      (space.n_nodes, space.n_nodes), symmetric=True)


def load_vector(space: P1Space, f) -> np.ndarray:
    b = np.zeros(space.n_nodes)
    fw = f(space.qx) * space.qw
    for a in range(space.d + 1):
        np.add.at(b, space.conn[space.qcell, a], fw * space.qphi[:, a])
    return b


def fem_solve(L: LagrangianFn, space: P1Space, tol: float = 1e-12) -> np.ndarray:
    """Nodal solution; CG on the assembled system for Poisson Lagrangians,
    :func:`find_extremal` on :func:`fem_lagrangian` otherwise."""
    if L.poisson is None:
        return find_extremal(fem_lagrangian(L, space), np.zeros(space.n_nodes), tol=tol)
    free = space.free
    K = stiffness_matrix(space, L).submatrix(free, free)
    b = load_vector(space, L.poisson.f)[free]
    u = np.zeros(space.n_nodes)
    u[free] = cg_solve(K, b, tol=tol)
    return u


def fem_l2_error(space: P1Space, u: np.ndarray, exact, quad: int = 4) -> float:
    """``||u_h - u||_{L2}`` with an independent high-order quadrature."""
    fine = build_p1_space(space.mesh, quad) if quad != space.quad else space
    vals, _ = fine.evaluate(u)
    return float(np.sqrt(np.sum(fine.qw * (vals - exact(fine.qx)) ** 2)))


def write_p1_csv(path: str | Path, space: P1Space, u: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node"] + [f"x{i + 1}" for i in range(space.d)] + ["u"])
        for a, x in enumerate(space.nodes):
            w.writerow([a, *[repr(float(c)) for c in x], repr(float(u[a]))])
