"""Continuous problem data: Lagrangians, Hamiltonians, diffusivities, test cases.

Pointwise functions are vectorized over leading axes: ``x`` has shape
``(..., d)``, ``y`` shape ``(...)`` and ``v``/``p`` shape ``(..., d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ScalarField = Callable[[np.ndarray], np.ndarray]


class LegendreError(ArithmeticError):
    """Newton iteration for ``dL/dv(x, y, g) = p`` did not converge."""

    def __init__(self, x, y, p, residual):
        self.x, self.y, self.p, self.residual = x, y, p, residual
        super().__init__(
            f"Legendre property violated or Newton failed at x={np.asarray(x).tolist()}, "
            f"y={float(y)!r}, p={np.asarray(p).tolist()} (residual {residual:.3e})"
        )


def constant_field(c: float) -> ScalarField:
    def f(x):
        return np.full(np.shape(x)[:-1], float(c))

    f.constant = float(c)
    return f


# {{{ diffusivity


@dataclass(frozen=True)
class Diffusivity:
    """Symmetric positive definite tensor field ``alpha(x)``.

    ``matrix(x)`` returns shape ``(..., d, d)``.
    """

    d: int
    matrix: Callable[[np.ndarray], np.ndarray]
    constant: bool = False
    scalar: bool = False

    @classmethod
    def identity(cls, d: int) -> Diffusivity:
        return cls.scalar_value(1.0, d)

    @classmethod
    def scalar_value(cls, a: float, d: int) -> Diffusivity:
        return cls.from_matrix(a * np.eye(d), scalar=True)

    @classmethod
    def diag(cls, values) -> Diffusivity:
        values = np.asarray(values, dtype=float)
        return cls.from_matrix(np.diag(values), scalar=bool(np.all(values == values[0])))

    @classmethod
    def from_matrix(cls, A, scalar: bool = False) -> Diffusivity:
        A = np.array(A, dtype=float, ndmin=2)
        _validate_spd(A)

        def matrix(x):
            return np.broadcast_to(A, np.shape(x)[:-1] + A.shape)

        return cls(d=A.shape[0], matrix=matrix, constant=True, scalar=scalar)

    @classmethod
    def from_function(cls, fn: Callable, d: int, scalar: bool = False, samples: int = 32, seed: int = 0) -> Diffusivity:
        """Wrap a user tensor field, checking SPD at random points of ``[0, 1]^d``."""
        alpha = cls(d=d, matrix=fn, constant=False, scalar=scalar)
        pts = np.random.default_rng(seed).uniform(size=(samples, d))
        for A in alpha.matrix(pts):
            _validate_spd(A)
        return alpha

    def apply(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.einsum("...ij,...j->...i", self.matrix(x), v)

    def solve(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        A = np.asarray(self.matrix(x))
        return np.linalg.solve(A, np.asarray(p, dtype=float)[..., None])[..., 0]

    def inverse_matrix(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.inv(self.matrix(x))


def _validate_spd(A: np.ndarray) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"diffusivity must be a square matrix, got shape {A.shape}")
    if not np.array_equal(A, A.T):
        raise ValueError("diffusivity must be symmetric")
    if np.linalg.eigvalsh(A).min() <= 0.0:
        raise ValueError("diffusivity must be positive definite")


# }}}


# {{{ Lagrangian and Hamiltonian functions


@dataclass(frozen=True)
class PoissonData:
    f: ScalarField
    alpha: Diffusivity


@dataclass(frozen=True)
class LagrangianFn:
    """Pointwise Lagrangian ``L(x, y, v)`` with its partial derivatives.

    ``poisson`` is set for the quadratic ``1/2 (alpha v).v - f y`` family so
    that schemes can take their linear-system path.
    """

    d: int
    eval: Callable
    dL_dy: Callable
    dL_dv: Callable
    convex: bool = False
    poisson: PoissonData | None = None

    def __call__(self, x, y, v):
        return self.eval(x, y, v)


@dataclass(frozen=True)
class HamiltonianFn:
    d: int
    eval: Callable
    dH_dy: Callable
    dH_dp: Callable
    g: Callable | None = field(default=None, repr=False)

    def __call__(self, x, y, p):
        return self.eval(x, y, p)


def poisson_lagrangian(f: ScalarField | float, alpha: Diffusivity | None = None, d: int | None = None) -> LagrangianFn:
    """``L(x, y, v) = 1/2 (alpha(x) v).v - f(x) y``."""
    if np.isscalar(f):
        f = constant_field(f)
    if alpha is None:
        if d is None:
            raise ValueError("give either alpha or the dimension d")
        alpha = Diffusivity.identity(d)
    elif d is not None and d != alpha.d:
        raise ValueError(f"dimension {d} does not match diffusivity dimension {alpha.d}")

    def L(x, y, v):
        return 0.5 * np.einsum("...i,...i->...", alpha.apply(x, v), v) - f(x) * y

    def dL_dy(x, y, v):
        return -f(x) * np.ones_like(np.asarray(y, dtype=float))

    def dL_dv(x, y, v):
        return alpha.apply(x, v)

    return LagrangianFn(alpha.d, L, dL_dy, dL_dv, convex=True, poisson=PoissonData(f, alpha))


def poisson_hamiltonian(f: ScalarField | float, alpha: Diffusivity) -> HamiltonianFn:
    """Closed form ``H(x, y, p) = 1/2 alpha^{-1}(x) p.p + f(x) y``."""
    if np.isscalar(f):
        f = constant_field(f)

    def H(x, y, p):
        return 0.5 * np.einsum("...i,...i->...", alpha.solve(x, p), p) + f(x) * y

    def dH_dy(x, y, p):
        return f(x) * np.ones_like(np.asarray(y, dtype=float))

    def dH_dp(x, y, p):
        return alpha.solve(x, p)

    return HamiltonianFn(alpha.d, H, dH_dy, dH_dp, g=dH_dp)


def _numerical_jacobian(fn, v, step):
    d = v.size
    J = np.empty((d, d))
    for k in range(d):
        dv = np.zeros(d)
        dv[k] = step * max(1.0, abs(v[k]))
        J[:, k] = (fn(v + dv) - fn(v - dv)) / (2.0 * dv[k])
    return J


def legendre_transform(L: LagrangianFn, tol: float = 1e-13, max_iter: int = 50, fd_step: float = 1e-6) -> HamiltonianFn:
    """Numerical Legendre transform of ``L`` with respect to ``v``.

    ``g(x, y, p)`` solves ``dL_dv(x, y, g) = p`` by Newton's method, with the
    Jacobian of ``dL_dv`` taken by central differences. Then
    ``H = p.g - L(x, y, g)``, ``dH_dp = g`` and ``dH_dy = -dL_dy(x, y, g)``.

    Raises
    ------
    LegendreError
        If Newton does not reach ``tol`` at some point.
    """
    d = L.d

    def g_point(x, y, p):
        def F(v):
            return np.asarray(L.dL_dv(x, y, v), dtype=float)

        v = np.zeros(d)
        scale = 1.0 + np.abs(p).max()
        res = F(v) - p
        for _ in range(max_iter):
            if np.abs(res).max() <= tol * scale:
                return v
            try:
                step = np.linalg.solve(_numerical_jacobian(F, v, fd_step), res)
            except np.linalg.LinAlgError:
                break
            v = v - step
            if not np.all(np.isfinite(v)):
                break
            res = F(v) - p
        if np.all(np.isfinite(res)) and np.abs(res).max() <= tol * scale:
            return v
        raise LegendreError(x, y, p, float(np.abs(res).max()))

    def g(x, y, p):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = p.shape[:-1]
        xs = np.broadcast_to(x, shape + (d,)).reshape(-1, d)
        ys = np.broadcast_to(y, shape).reshape(-1)
        ps = p.reshape(-1, d)
        out = np.array([g_point(xs[i], ys[i], ps[i]) for i in range(len(ps))])
        return out.reshape(shape + (d,))

    def H(x, y, p):
        v = g(x, y, p)
        return np.einsum("...i,...i->...", p, v) - L.eval(x, y, v)

    def dH_dy(x, y, p):
        return -L.dL_dy(x, y, g(x, y, p))

    return HamiltonianFn(d, H, dH_dy, g, g=g)


# }}}


# {{{ manufactured solutions


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact solution of ``-div(alpha grad u) = f`` with ``u = 0`` on the boundary."""

    name: str
    d: int
    u: ScalarField
    grad_u: Callable[[np.ndarray], np.ndarray]
    f: ScalarField
    alpha: Diffusivity

    def lagrangian(self) -> LagrangianFn:
        return poisson_lagrangian(self.f, self.alpha)

    def flux(self, x: np.ndarray) -> np.ndarray:
        """Exact mixed variable ``p = alpha grad u``."""
        return self.alpha.apply(x, self.grad_u(x))


def _sin1d():
    pi = np.pi
    return ManufacturedCase(
        "sin1d", 1,
        u=lambda x: np.sin(pi * x[..., 0]),
        grad_u=lambda x: pi * np.cos(pi * x[..., :1]),
        f=lambda x: pi**2 * np.sin(pi * x[..., 0]),
        alpha=Diffusivity.identity(1),
    )


def _quad1d():
    return ManufacturedCase(
        "quad1d", 1,
        u=lambda x: 0.5 * x[..., 0] * (1.0 - x[..., 0]),
        grad_u=lambda x: 0.5 - x[..., :1],
        f=constant_field(1.0),
        alpha=Diffusivity.identity(1),
    )


def _sinsin(name, weights):
    pi = np.pi
    a = np.asarray(weights, dtype=float)

    def u(x):
        return np.sin(pi * x[..., 0]) * np.sin(pi * x[..., 1])

    def grad_u(x):
        sx, sy = np.sin(pi * x[..., 0]), np.sin(pi * x[..., 1])
        cx, cy = np.cos(pi * x[..., 0]), np.cos(pi * x[..., 1])
        return pi * np.stack([cx * sy, sx * cy], axis=-1)

    def f(x):
        return a.sum() * pi**2 * u(x)

    alpha = Diffusivity.identity(2) if np.all(a == 1.0) else Diffusivity.diag(a)
    return ManufacturedCase(name, 2, u=u, grad_u=grad_u, f=f, alpha=alpha)


_CASES = {
    "sin1d": _sin1d,
    "quad1d": _quad1d,
    "sinsin2d": lambda: _sinsin("sinsin2d", [1.0, 1.0]),
    "aniso2d": lambda: _sinsin("aniso2d", [1.0, 2.0]),
}

CASE_NAMES = tuple(_CASES)


def manufactured_case(name: str) -> ManufacturedCase:
    try:
        return _CASES[name]()
    except KeyError:
        raise ValueError(f"unknown manufactured case {name!r}; choose from {', '.join(_CASES)}") from None


# }}}
