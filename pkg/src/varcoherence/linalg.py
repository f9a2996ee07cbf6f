"""Sparse storage, conjugate gradients and a Schur-complement saddle-point solver."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sps


class SolverError(ArithmeticError):
    """A linear solve failed; ``block`` names the failing stage when relevant."""

    def __init__(self, message: str, block: str | None = None, residual: float | None = None):
        self.block = block
        self.residual = residual
        super().__init__(f"[{block}] {message}" if block else message)


class NotSPDError(SolverError):
    pass


# {{{ sparse matrix


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Immutable CSR matrix with a symmetry flag.

    Assembled from triplets; duplicate entries are summed and column indices
    sorted, so assembly is deterministic for a given triplet order.
    """

    csr: sps.csr_matrix
    symmetric: bool = False

    @classmethod
    def from_triplets(cls, rows, cols, vals, shape, symmetric: bool | None = None) -> SparseMatrix:
        A = sps.coo_matrix(
            (np.asarray(vals, dtype=float), (np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))),
            shape=shape,
        ).tocsr()
        A.sum_duplicates()
        A.sort_indices()
        return cls._wrap(A, symmetric)

    @classmethod
    def from_scipy(cls, A, symmetric: bool | None = None) -> SparseMatrix:
        A = sps.csr_matrix(A, dtype=float)
        A.sum_duplicates()
        A.sort_indices()
        return cls._wrap(A, symmetric)

    @classmethod
    def from_dense(cls, A, symmetric: bool | None = None) -> SparseMatrix:
        return cls.from_scipy(sps.csr_matrix(np.asarray(A, dtype=float)), symmetric)

    @classmethod
    def _wrap(cls, A, symmetric):
        if symmetric is None:
            symmetric = A.shape[0] == A.shape[1] and is_symmetric(A)
        return cls(csr=A, symmetric=bool(symmetric))

    @property
    def shape(self) -> tuple[int, int]:
        return self.csr.shape

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    @property
    def T(self) -> SparseMatrix:
        return SparseMatrix.from_scipy(self.csr.T, self.symmetric)

    def __matmul__(self, x):
        if isinstance(x, SparseMatrix):
            return SparseMatrix.from_scipy(self.csr @ x.csr)
        return self.csr @ x

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()

    def is_diagonal(self) -> bool:
        coo = self.csr.tocoo()
        return bool(np.all(coo.row == coo.col))

    def submatrix(self, rows, cols) -> SparseMatrix:
        return SparseMatrix.from_scipy(self.csr[rows][:, cols])


def is_symmetric(A, tol: float = 1e-14) -> bool:
    A = sps.csr_matrix(A)
    if A.shape[0] != A.shape[1]:
        return False
    diff = abs(A - A.T)
    scale = abs(A).max() if A.nnz else 1.0
    return bool(diff.nnz == 0 or diff.max() <= tol * max(scale, 1e-300))


# }}}


# {{{ conjugate gradients


@dataclass(frozen=True)
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float


def _as_operator(A) -> Callable[[np.ndarray], np.ndarray]:
    if callable(A) and not hasattr(A, "__matmul__"):
        return A
    return lambda x: A @ x


def cg(A, b, tol: float = 1e-12, max_iter: int | None = None, x0=None, diag=None, block: str | None = None) -> CGResult:
    """Conjugate gradients for an SPD operator.

    ``A`` may be a :class:`SparseMatrix`, a dense/scipy matrix, or a callable
    ``x -> A x``. ``diag`` enables Jacobi preconditioning. Stops when
    ``||A x - b||_2 <= tol ||b||_2``.
    """
    op = _as_operator(A)
    b = np.asarray(b, dtype=float)
    n = b.size
    max_iter = 10 * n + 10 if max_iter is None else max_iter
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return CGResult(np.zeros(n), 0, 0.0)
    r = b - op(x)
    target = tol * bnorm
    rnorm = np.linalg.norm(r)
    if rnorm <= target:
        return CGResult(x, 0, float(rnorm / max(bnorm, 1e-300)))
    inv_diag = None if diag is None else 1.0 / np.asarray(diag, dtype=float)
    z = r if inv_diag is None else inv_diag * r
    p = z.copy()
    rz = r @ z
    for k in range(1, max_iter + 1):
        Ap = op(p)
        curv = p @ Ap
        if curv <= 0.0:
            raise NotSPDError(f"operator is not positive definite (p.Ap = {curv:.3e})", block)
        step = rz / curv
        x += step * p
        r -= step * Ap
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            # the recursive residual drifts; confirm with the true one
            r = b - op(x)
            rnorm = np.linalg.norm(r)
            if rnorm <= target:
                return CGResult(x, k, float(rnorm / bnorm))
        z = r if inv_diag is None else inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"CG did not converge in {max_iter} iterations (relative residual {rnorm / bnorm:.3e})",
        block, float(rnorm / bnorm),
    )


def cg_solve(A, b, tol: float = 1e-12, max_iter: int | None = None) -> np.ndarray:
    """Solve ``A x = b`` for SPD ``A``; Jacobi-preconditioned when ``A`` exposes a diagonal."""
    diag = A.diagonal() if hasattr(A, "diagonal") else None
    if diag is not None and np.any(diag <= 0.0):
        diag = None
    return cg(A, b, tol=tol, max_iter=max_iter, diag=diag).x


def dense_solve(A, b, max_size: int = 500) -> np.ndarray:
    """Dense LU solve, intended as a test oracle for small systems only."""
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)
    if A.shape[0] > max_size:
        raise ValueError(f"dense oracle is capped at n <= {max_size}, got {A.shape[0]}")
    return np.linalg.solve(A, np.asarray(b, dtype=float))


# }}}


# {{{ saddle-point systems


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    """``[[M, B^T], [B, 0]] (p, u) = (rhs_p, rhs_u)`` with ``M`` SPD."""

    M: SparseMatrix
    B: SparseMatrix
    rhs_p: np.ndarray
    rhs_u: np.ndarray

    @property
    def n_p(self) -> int:
        return self.M.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[0]

    def matrix(self) -> SparseMatrix:
        return SparseMatrix.from_scipy(sps.bmat([[self.M.csr, self.B.csr.T], [self.B.csr, None]]))

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.rhs_p, self.rhs_u])

    def residuals(self, p: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.M @ p + self.B.T @ u - self.rhs_p, self.B @ p - self.rhs_u


def _mass_solver(M: SparseMatrix, tol: float):
    if M.is_diagonal():
        d = M.diagonal()
        return lambda r: r / d
    diag = M.diagonal()
    return lambda r: cg(M, r, tol=tol, diag=diag, block="M").x


def saddle_solve(S: SaddleSystem, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Solve a saddle system by CG on the Schur complement ``B M^{-1} B^T``.

    From ``M p + B^T u = g`` and ``B p = h``:
    ``(B M^{-1} B^T) u = B M^{-1} g - h`` and ``p = M^{-1}(g - B^T u)``.
    Inner ``M`` solves are exact division when ``M`` is diagonal and
    Jacobi-preconditioned CG otherwise.
    """
    inner_tol = max(tol * 1e-3, 1e-15)
    solve_M = _mass_solver(S.M, inner_tol)
    BT = S.B.T
    g, h = np.asarray(S.rhs_p, dtype=float), np.asarray(S.rhs_u, dtype=float)

    rhs = (S.B @ solve_M(g) if np.any(g) else np.zeros(S.n_u)) - h
    schur = lambda u: S.B @ solve_M(BT @ u)  # noqa: E731
    # Jacobi estimate of the Schur diagonal with the lumped mass
    Md = S.M.diagonal()
    sdiag = np.asarray(S.B.csr.multiply(S.B.csr).multiply(1.0 / Md[None, :]).sum(axis=1)).ravel()
    u = cg(schur, rhs, tol=tol, diag=sdiag if np.all(sdiag > 0) else None, block="schur").x
    p = solve_M(g - BT @ u)

    r_p, r_u = S.residuals(p, u)
    scale_p = max(np.linalg.norm(S.M @ p), np.linalg.norm(BT @ u), np.linalg.norm(g), 1e-300)
    scale_u = max(np.linalg.norm(h), np.linalg.norm(S.B @ p), 1e-300)
    if np.linalg.norm(r_p) > 1e3 * tol * scale_p:
        raise SolverError("flux block residual above tolerance", "p", float(np.linalg.norm(r_p) / scale_p))
    if np.linalg.norm(r_u) > 1e3 * tol * scale_u:
        raise SolverError("divergence block residual above tolerance", "u", float(np.linalg.norm(r_u) / scale_u))
    return p, u


# }}}
