"""Finite differences on ``[0, 1]^d`` with homogeneous Dirichlet data.

Nodal fields are arrays of shape ``grid.shape`` (vector fields carry a
trailing axis of length ``d``); values outside the index set ``J`` are taken
to be zero. The default stencil pair is a forward-difference gradient with a
backward-difference divergence; ``stencil="backward"`` swaps the two. Either
pair satisfies the discrete Green-Gauss (summation-by-parts) identity.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import scipy.sparse as sps

from .functional import DiscreteFunctional, Space, find_extremal
from .linalg import SparseMatrix, cg_solve
from .mesh import CartesianGrid
from .problem import LagrangianFn

STENCILS = ("forward", "backward")


def _check_stencil(stencil: str) -> None:
    if stencil not in STENCILS:
        raise ValueError(f"unknown stencil pair {stencil!r}; choose from {STENCILS}")


def _shift(a: np.ndarray, axis: int, offset: int) -> np.ndarray:
    """``out[j] = a[j + offset * e_axis]``, zero outside the index range."""
    out = np.zeros_like(a)
    n = a.shape[axis]
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if offset > 0:
        src[axis], dst[axis] = slice(offset, n), slice(0, n - offset)
    else:
        src[axis], dst[axis] = slice(0, n + offset), slice(-offset, n)
    out[tuple(dst)] = a[tuple(src)]
    return out


def grad_h(grid: CartesianGrid, u: np.ndarray, stencil: str = "forward") -> np.ndarray:
    """Discrete gradient; forward: ``(u_{j + e_i} - u_j) / h`` per component."""
    _check_stencil(stencil)
    u = np.asarray(u, dtype=float).reshape(grid.shape)
    comps = []
    for i in range(grid.d):
        if stencil == "forward":
            comps.append(_shift(u, i, 1) - u)
        else:
            comps.append(u - _shift(u, i, -1))
    return np.stack(comps, axis=-1) / grid.h


def div_h(grid: CartesianGrid, p: np.ndarray, stencil: str = "forward") -> np.ndarray:
    """Discrete divergence paired with :func:`grad_h`; forward pair uses
    ``sum_i (p_j - p_{j - e_i})_i / h``."""
    _check_stencil(stencil)
    p = np.asarray(p, dtype=float).reshape(grid.shape + (grid.d,))
    out = np.zeros(grid.shape)
    for i in range(grid.d):
        pi = p[..., i]
        if stencil == "forward":
            out += pi - _shift(pi, i, -1)
        else:
            out += _shift(pi, i, 1) - pi
    return out / grid.h


def grad_h_transpose(grid: CartesianGrid, P: np.ndarray, stencil: str = "forward") -> np.ndarray:
    """Transpose of the :func:`grad_h` matrix applied to ``P``.

    Built by scattering each stencil coefficient rather than by reusing
    :func:`div_h`; the Green-Gauss identity is what makes the two agree.
    """
    _check_stencil(stencil)
    P = np.asarray(P, dtype=float).reshape(grid.shape + (grid.d,))
    out = np.zeros(grid.shape)
    N = grid.N
    for i in range(grid.d):
        Pi = P[..., i] / grid.h
        lo = [slice(None)] * grid.d
        hi = [slice(None)] * grid.d
        lo[i], hi[i] = slice(0, N), slice(1, N + 1)
        lo, hi = tuple(lo), tuple(hi)
        if stencil == "forward":
            # (grad u)_j = (u_{j+1} - u_j) / h with u_{N+1} = 0
            out -= Pi
            out[hi] += Pi[lo]
        else:
            # (grad u)_j = (u_j - u_{j-1}) / h with u_{-1} = 0
            out += Pi
            out[lo] -= Pi[hi]
    return out


def check_vh(grid: CartesianGrid, u: np.ndarray, atol: float = 0.0) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(grid.shape)
    if np.any(np.abs(u[grid.boundary_mask()]) > atol):
        raise ValueError("field does not vanish on the index boundary (not in V_h)")
    return u


def fd_green_gauss_defect(grid: CartesianGrid, u: np.ndarray, p: np.ndarray, stencil: str = "forward",
                          relative: bool = True) -> float:
    """Defect of ``sum_j p_j.(grad_h u)_j h^d = -sum_j (div_h p)_j u_j h^d``.

    The relative defect divides by the sum of absolute values of all terms.

    Raises
    ------
    ValueError
        If ``u`` is not in ``V_h``.
    """
    u = check_vh(grid, u)
    p = np.asarray(p, dtype=float).reshape(grid.shape + (grid.d,))
    hd = grid.h**grid.d
    lhs_terms = np.einsum("...i,...i->...", p, grad_h(grid, u, stencil)) * hd
    rhs_terms = div_h(grid, p, stencil) * u * hd
    defect = abs(lhs_terms.sum() + rhs_terms.sum())
    if not relative:
        return float(defect)
    scale = np.abs(lhs_terms).sum() + np.abs(rhs_terms).sum()
    return float(defect / scale) if scale > 0.0 else float(defect)


def fd_el_residual(L: LagrangianFn, grid: CartesianGrid, u: np.ndarray, stencil: str = "forward") -> np.ndarray:
    """``dL/dy(x_j, u_j, grad_h u_j) - div_h[dL/dv(x, u, grad_h u)]_j`` at interior nodes, 0 on the boundary."""
    u = np.asarray(u, dtype=float).reshape(grid.shape)
    x = grid.nodes()
    gu = grad_h(grid, u, stencil)
    r = L.dL_dy(x, u, gu) - div_h(grid, L.dL_dv(x, u, gu), stencil)
    return np.where(grid.interior_mask(), r, 0.0)


def fd_space(grid: CartesianGrid) -> Space:
    return Space("fd-nodal", grid.n_nodes, free=grid.interior_mask().ravel())


def fd_lagrangian(L: LagrangianFn, grid: CartesianGrid, stencil: str = "forward") -> DiscreteFunctional:
    """``L_h(u) = sum_{j in J} L(x_j, u_j, (grad_h u)_j) h^d`` on flattened nodal vectors.

    The gradient is ``h^d (dL/dy + G^T dL/dv)`` with ``G^T`` from
    :func:`grad_h_transpose`, restricted to interior nodes.
    """
    _check_stencil(stencil)
    x = grid.nodes()
    hd = grid.h**grid.d

    def value(uf):
        u = uf.reshape(grid.shape)
        return float(np.sum(L.eval(x, u, grad_h(grid, u, stencil))) * hd)

    def gradient(uf):
        u = uf.reshape(grid.shape)
        gu = grad_h(grid, u, stencil)
        g = L.dL_dy(x, u, gu) + grad_h_transpose(grid, L.dL_dv(x, u, gu), stencil)
        return (g * hd).ravel()

    hessian = None
    if L.poisson is not None:
        hessian = lambda: _poisson_matrix(grid, L, stencil, full=True)  # noqa: E731
    return DiscreteFunctional(
        fd_space(grid), value, gradient,
        quadratic=L.poisson is not None, convex=L.convex, hessian=hessian,
    )


def gradient_matrix(grid: CartesianGrid, stencil: str = "forward") -> SparseMatrix:
    """Sparse matrix of :func:`grad_h`, rows ordered (node, component)."""
    n1 = grid.N + 1
    eye = sps.identity(n1, format="csr")
    if stencil == "forward":
        D1 = sps.diags([-np.ones(n1), np.ones(n1 - 1)], [0, 1], shape=(n1, n1))
    else:
        D1 = sps.diags([np.ones(n1), -np.ones(n1 - 1)], [0, -1], shape=(n1, n1))
    D1 = D1 / grid.h
    comps = []
    for i in range(grid.d):
        op = None
        for k in range(grid.d):
            f = D1 if k == i else eye
            op = f if op is None else sps.kron(op, f)
        comps.append(sps.csr_matrix(op))
    # interleave components so that row = node * d + i
    G = sps.vstack(comps).tocsr()
    perm = np.arange(grid.d * grid.n_nodes).reshape(grid.d, grid.n_nodes).T.ravel()
    return SparseMatrix.from_scipy(G[perm])


def _poisson_matrix(grid, L, stencil, full=False) -> SparseMatrix:
    alpha = L.poisson.alpha
    G = gradient_matrix(grid, stencil).csr
    A = alpha.matrix(grid.nodes().reshape(-1, grid.d))
    W = sps.block_diag(list(A), format="csr") * grid.h**grid.d
    K = (G.T @ W @ G).tocsr()
    free = grid.interior_mask().ravel()
    if full:
        # zero rows/columns on fixed nodes so that masked hessian products stay in V_h
        P = sps.diags(free.astype(float))
        return SparseMatrix.from_scipy(P @ K @ P, symmetric=True)
    return SparseMatrix.from_scipy(K[free][:, free], symmetric=True)


def poisson_system(L: LagrangianFn, grid: CartesianGrid, stencil: str = "forward") -> tuple[SparseMatrix, np.ndarray]:
    """Interior SPD system ``G^T (alpha h^d) G u = h^d f`` of the Poisson Lagrangian."""
    if L.poisson is None:
        raise ValueError("the linear-system path needs a Poisson-type Lagrangian")
    free = grid.interior_mask().ravel()
    A = _poisson_matrix(grid, L, stencil)
    b = L.poisson.f(grid.nodes().reshape(-1, grid.d))[free] * grid.h**grid.d
    return A, b


def fd_solve(L: LagrangianFn, grid: CartesianGrid, tol: float = 1e-12, stencil: str = "forward") -> np.ndarray:
    """Solve the discrete Euler-Lagrange equation, returning the nodal array.

    Poisson Lagrangians take the assembled CG path; anything else is
    minimized with :func:`find_extremal` on :func:`fd_lagrangian`.
    """
    if L.poisson is not None:
        A, b = poisson_system(L, grid, stencil)
        u = np.zeros(grid.n_nodes)
        u[grid.interior_mask().ravel()] = cg_solve(A, b, tol=tol)
        return u.reshape(grid.shape)
    F = fd_lagrangian(L, grid, stencil)
    return find_extremal(F, np.zeros(grid.n_nodes), tol=tol).reshape(grid.shape)


def write_nodal_csv(path: str | Path, grid: CartesianGrid, u: np.ndarray) -> None:
    """Columns ``j1..jd, x1..xd, u``."""
    u = np.asarray(u).reshape(grid.shape)
    x = grid.nodes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"j{i + 1}" for i in range(grid.d)] + [f"x{i + 1}" for i in range(grid.d)] + ["u"])
        for j in grid.indices():
            jt = tuple(j)
            w.writerow([*j.tolist(), *[repr(float(c)) for c in x[jt]], repr(float(u[jt]))])
