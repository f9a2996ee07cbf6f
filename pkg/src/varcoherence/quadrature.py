"""Quadrature rules on intervals, triangles and polygons.

All rules return ``(points, weights)`` in physical coordinates, with the
weights summing to the measure of the element.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    # reference interval [0, 1]
    return 0.5 * (x + 1.0), 0.5 * w


def interval_rule(a: float, b: float, n: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule with ``n`` points on ``[a, b]``; exact to degree 2n-1."""
    t, w = _gauss_legendre(n)
    length = b - a
    return (a + length * t)[:, None], length * w


@lru_cache(maxsize=None)
def _reference_triangle(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n == 1:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]]), np.array([0.5])
    # collapsed (Duffy) tensor rule, exact to degree 2n-2
    t, w = _gauss_legendre(n)
    s, ws = _gauss_legendre(n)
    xi = np.outer(t, np.ones(n)).ravel()
    eta = np.outer(np.ones(n), s).ravel()
    pts = np.column_stack([xi * (1.0 - eta), eta])
    wts = np.outer(w * 1.0, ws).ravel() * (1.0 - eta)
    return pts, wts


def triangle_rule(vertices: np.ndarray, n: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature on the triangle with the given (3, 2) vertices.

    ``n = 1`` is the barycenter rule (degree 1); ``n >= 2`` is a collapsed
    Gauss rule exact for polynomials of degree ``2n - 2``.
    """
    v = np.asarray(vertices, dtype=float)
    ref, w = _reference_triangle(n)
    e1 = v[1] - v[0]
    e2 = v[2] - v[0]
    jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
    pts = v[0] + ref[:, :1] * e1 + ref[:, 1:] * e2
    return pts, w * jac


def polygon_rule(vertices: np.ndarray, centroid: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule: fan triangulation about ``centroid``, ``triangle_rule`` on each piece."""
    v = np.asarray(vertices, dtype=float)
    pts, wts = [], []
    for i in range(len(v)):
        p, w = triangle_rule(np.array([centroid, v[i], v[(i + 1) % len(v)]]), n)
        pts.append(p)
        wts.append(w)
    return np.vstack(pts), np.concatenate(wts)


def segment_rule(a: np.ndarray, b: np.ndarray, n: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule along the straight segment from ``a`` to ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t, w = _gauss_legendre(n)
    length = float(np.linalg.norm(b - a))
    return a + t[:, None] * (b - a), w * length
