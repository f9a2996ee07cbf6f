"""Discrete functionals, their Gateaux derivatives, extremals and coherence checks.

A discrete state is a flat ``numpy`` array tagged by the :class:`Space` it
lives in. ``Space.free`` marks the variation directions: gradients are zero
on fixed (Dirichlet) entries, and probes and minimizers leave them alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .linalg import SparseMatrix


class SpaceMismatch(ValueError):
    pass


class ExtremalNotFound(ArithmeticError):
    """``find_extremal`` ran out of iterations; carries the best iterate."""

    def __init__(self, best: np.ndarray, residual: float, iterations: int):
        self.best = best
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"no extremal after {iterations} iterations (gradient max-norm {residual:.3e})")


@dataclass(frozen=True, eq=False)
class Space:
    """Tag, dimension, variation mask and optional named blocks of a DOF space."""

    tag: str
    size: int
    free: np.ndarray | None = None
    blocks: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.free is not None and self.free.shape != (self.size,):
            raise ValueError("free mask does not match the space size")
        if self.blocks and sum(n for _, n in self.blocks) != self.size:
            raise ValueError("block sizes do not add up to the space size")

    @property
    def free_mask(self) -> np.ndarray:
        return np.ones(self.size, dtype=bool) if self.free is None else self.free

    def check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.size,):
            raise SpaceMismatch(f"vector of shape {x.shape} is not in space {self.tag!r} of size {self.size}")
        return x

    def mask(self, x: np.ndarray) -> np.ndarray:
        """Zero the fixed entries (projection onto the variation space)."""
        return x if self.free is None else np.where(self.free, x, 0.0)

    def split(self, x: np.ndarray) -> dict[str, np.ndarray]:
        out, start = {}, 0
        for name, n in self.blocks:
            out[name] = x[start : start + n]
            start += n
        return out

    def join(self, *parts: np.ndarray) -> np.ndarray:
        return np.concatenate([np.ravel(p) for p in parts])


@dataclass(frozen=True, eq=False)
class DiscreteFunctional:
    """A scalar functional on a :class:`Space` with its coordinate gradient.

    ``gradient(u)[i]`` is the Gateaux derivative in direction ``e_i`` (zero on
    fixed entries). ``hessian`` is provided by quadratic functionals.
    """

    space: Space
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    quadratic: bool = False
    convex: bool = False
    hessian: Callable[[], SparseMatrix] | None = field(default=None, repr=False)

    def __call__(self, u: np.ndarray) -> float:
        return float(self.value(self.space.check(u)))

    def grad(self, u: np.ndarray) -> np.ndarray:
        return self.space.mask(np.asarray(self.gradient(self.space.check(u)), dtype=float))

    def gateaux(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(self.grad(u) @ self.space.check(v))

    def hessp(self, u: np.ndarray, d: np.ndarray) -> np.ndarray:
        if self.hessian is not None:
            return self.space.mask(self.hessian() @ d)
        # exact for quadratic functionals
        return self.grad(u + d) - self.grad(u)


def gateaux_fd_check(F: DiscreteFunctional, u: np.ndarray, v: np.ndarray, steps=(1e-4, 1e-5, 1e-6)) -> float:
    """Central-difference check of the Gateaux derivative ``DF(u)(v)``.

    Returns ``|(F(u + eps v) - F(u - eps v)) / (2 eps) - DF(u)(v)| / (1 + |DF(u)(v)|)``
    minimized over ``steps``.
    """
    u = F.space.check(u)
    v = F.space.check(v)
    exact = F.gateaux(u, v)
    errs = [
        abs((F(u + eps * v) - F(u - eps * v)) / (2.0 * eps) - exact) / (1.0 + abs(exact))
        for eps in steps
    ]
    return float(min(errs))


def find_extremal(F: DiscreteFunctional, u0: np.ndarray, tol: float = 1e-12, max_iter: int | None = None) -> np.ndarray:
    """Find a critical point of ``F`` by nonlinear conjugate gradients.

    Polak-Ribiere (non-negative) directions; the line search is exact: closed form for
    quadratic functionals, a bracketed root of the directional derivative otherwise. Fixed entries of ``u0``
    are kept. Converged when ``||grad||_inf <= tol (1 + ||grad(u0)||_inf)``.

    Raises
    ------
    ExtremalNotFound
        After ``max_iter`` iterations, with the best iterate attached.
    """
    space = F.space
    u = space.check(u0).copy()
    max_iter = 20 * space.size + 50 if max_iter is None else max_iter
    g = F.grad(u)
    target = tol * (1.0 + np.abs(g).max())
    if np.abs(g).max() <= target:
        return u
    d = -g
    best, best_res = u.copy(), np.abs(g).max()
    for k in range(1, max_iter + 1):
        slope = g @ d
        if F.quadratic:
            curv = d @ F.hessp(u, d)
            if curv <= 0.0:
                raise ExtremalNotFound(best, best_res, k)
            step = -slope / curv
        else:
            step = _line_step(F, u, d, g)
        u = u + step * d
        g_new = F.grad(u)
        res = np.abs(g_new).max()
        if res < best_res:
            best, best_res = u.copy(), res
        if res <= target:
            return u
        beta = max(0.0, g_new @ (g_new - g) / (g @ g))
        d = -g_new + beta * d
        if g_new @ d >= 0.0:
            d = -g_new
        g = g_new
    raise ExtremalNotFound(best, best_res, max_iter)


def _line_step(F, u, d, g):
    """Exact line search: root of ``phi'(t) = grad F(u + t d) . d``.

    Works on the directional derivative rather than on function values, so
    it stays accurate when value differences are at roundoff level.
    """
    dphi = lambda t: float(F.grad(u + t * d) @ d)  # noqa: E731
    slope = float(g @ d)
    # initial guess from a secant estimate of the curvature
    eps = 1e-7 / max(np.abs(d).max(), 1e-300)
    curv = (dphi(eps) - slope) / eps
    t = -slope / curv if curv > 0.0 else 1.0
    lo, hi = 0.0, t
    for _ in range(60):
        if dphi(hi) >= 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        return hi
    if dphi(hi) == 0.0:
        return hi
    return brentq(dphi, lo, hi, xtol=1e-15 * max(hi, 1.0), rtol=4 * np.finfo(float).eps)


# {{{ coherence


@dataclass(frozen=True)
class CoherenceReport:
    scheme: str
    mesh: str
    probes: int
    max_abs: float
    max_rel: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel <= self.tol

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "mesh": self.mesh,
            "probes": self.probes,
            "max_abs": self.max_abs,
            "max_rel": self.max_rel,
            "tol": self.tol,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def coherence_check(
    variational: DiscreteFunctional,
    residual: Callable[[np.ndarray], np.ndarray],
    mass,
    probes: int = 10,
    seed: int = 0,
    tol: float = 1e-12,
    scheme: str = "",
    mesh: str = "",
) -> CoherenceReport:
    """Compare ``gradient(u)`` with ``mass * residual(u)`` at random states.

    ``mass`` is a vector of per-DOF factors or a matrix / operator (block
    schemes). Probe states are uniform in ``[-1, 1]`` per DOF, with fixed
    entries zeroed; only free entries are compared. The relative defect of a
    probe is its max-abs defect over ``max_i |gradient(u)[i]|``.
    """
    space = variational.space
    free = space.free_mask
    if isinstance(mass, np.ndarray) and mass.ndim == 1:
        if mass.shape != (space.size,):
            raise SpaceMismatch(f"mass vector has shape {mass.shape}, expected ({space.size},)")
        apply_mass = lambda r: mass * r  # noqa: E731
    elif callable(mass) and not hasattr(mass, "__matmul__"):
        apply_mass = mass
    else:
        apply_mass = lambda r: mass @ r  # noqa: E731

    rng = np.random.default_rng(seed)
    max_abs = max_rel = 0.0
    for _ in range(probes):
        u = space.mask(rng.uniform(-1.0, 1.0, size=space.size))
        g = variational.grad(u)
        r = np.asarray(residual(u), dtype=float)
        if r.shape != (space.size,):
            raise SpaceMismatch(f"residual has shape {r.shape}, expected ({space.size},)")
        defect = np.abs(g - apply_mass(r))[free]
        a = float(defect.max()) if defect.size else 0.0
        scale = float(np.abs(g[free]).max()) if defect.size else 0.0
        max_abs = max(max_abs, a)
        max_rel = max(max_rel, a / scale if scale > 0.0 else a)
    return CoherenceReport(scheme, mesh, probes, max_abs, max_rel, tol)


# }}}
