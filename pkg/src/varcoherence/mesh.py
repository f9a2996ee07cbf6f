"""Geometric carriers: uniform Cartesian grids and conformal polytopal meshes.

A :class:`PolyMesh` stores each face once, with a single canonical unit
normal pointing out of its lowest-index incident cell. Cells see the face
through a sign (+1 for the owning cell, -1 for the neighbour), so face-normal
fluxes are continuous across internal faces by construction.

Faces are ordered by (lowest incident cell, face-center coordinates); this
order is the one used by the mesh text format for boundary-face centers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

#: default angular tolerance (radians) for the orthogonality conditions
ADMISSIBILITY_TOL = 1e-10


class MeshError(ValueError):
    """Raised for invalid mesh input (non-conformal, degenerate, misoriented)."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


# {{{ Cartesian grid


@dataclass(frozen=True)
class CartesianGrid:
    """Uniform grid of ``[0, 1]^d`` with ``N`` subdivisions per direction.

    Nodal arrays on the grid have shape ``(N + 1,) * d`` and are indexed by
    the multi-index ``j``; the node coordinate is ``x_j = j * h``.
    """

    d: int
    N: int

    def __post_init__(self) -> None:
        if self.d not in (1, 2, 3):
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {self.d}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"number of subdivisions must be a positive integer, got {self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N + 1,) * self.d

    @property
    def n_nodes(self) -> int:
        return (self.N + 1) ** self.d

    @property
    def n_interior(self) -> int:
        return (self.N - 1) ** self.d

    def indices(self) -> np.ndarray:
        """All multi-indices ``j`` in ``J``, shape ``(n_nodes, d)``, C order."""
        return np.array(list(product(range(self.N + 1), repeat=self.d)), dtype=int)

    def nodes(self) -> np.ndarray:
        """Node coordinates with shape ``shape + (d,)``."""
        axes = [np.arange(self.N + 1) / self.N] * self.d
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def boundary_mask(self) -> np.ndarray:
        """True on the index boundary: some component equal to 0 or N."""
        mask = np.zeros(self.shape, dtype=bool)
        for i in range(self.d):
            idx = [slice(None)] * self.d
            idx[i] = 0
            mask[tuple(idx)] = True
            idx[i] = self.N
            mask[tuple(idx)] = True
        return mask

    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask()


def build_cartesian_grid(d: int, N: int) -> CartesianGrid:
    return CartesianGrid(d=d, N=N)


# }}}


# {{{ polytopal mesh


@dataclass(frozen=True, eq=False)
class PolyMesh:
    """Conformal mesh of intervals (1D) or simple polygons (2D)."""

    vertices: np.ndarray
    cells: tuple[tuple[int, ...], ...]
    cell_measures: np.ndarray
    cell_centroids: np.ndarray
    face_vertices: tuple[tuple[int, ...], ...]
    face_cells: np.ndarray
    face_measures: np.ndarray
    face_centers: np.ndarray
    face_normals: np.ndarray
    cell_faces: tuple[np.ndarray, ...]
    cell_signs: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.face_vertices)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] < 0)

    @property
    def internal_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] >= 0)

    @property
    def domain_measure(self) -> float:
        return float(self.cell_measures.sum())

    def is_boundary_face(self, e: int) -> bool:
        return bool(self.face_cells[e, 1] < 0)

    def outward_normal(self, K: int, e: int) -> np.ndarray:
        """Unit normal to face ``e`` pointing out of cell ``K``."""
        if self.face_cells[e, 0] == K:
            return self.face_normals[e]
        if self.face_cells[e, 1] == K:
            return -self.face_normals[e]
        raise MeshError(f"face {e} is not a face of cell {K}")

    def cell_vertices(self, K: int) -> np.ndarray:
        return self.vertices[list(self.cells[K])]

    def boundary_vertex_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        for e in self.boundary_faces:
            mask[list(self.face_vertices[e])] = True
        return mask

    def closure_defect(self, K: int) -> float:
        """``|sum_e |e| n_{K,e}|`` relative to the cell perimeter."""
        faces = self.cell_faces[K]
        signs = self.cell_signs[K]
        vec = (signs[:, None] * self.face_measures[faces, None] * self.face_normals[faces]).sum(axis=0)
        return float(np.linalg.norm(vec) / self.face_measures[faces].sum())

    def is_simplicial(self) -> bool:
        return all(len(c) == self.dim + 1 for c in self.cells)

    def describe(self) -> str:
        return f"{self.dim}d:{self.n_cells}cells:{self.n_faces}faces"


def _polygon_area_centroid(p: np.ndarray) -> tuple[float, np.ndarray]:
    x, y = p[:, 0], p[:, 1]
    xs, ys = np.roll(x, -1), np.roll(y, -1)
    cross = x * ys - xs * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        return 0.0, p.mean(axis=0)
    cx = ((x + xs) * cross).sum() / (6.0 * area)
    cy = ((y + ys) * cross).sum() / (6.0 * area)
    return float(area), np.array([cx, cy])


def _on_open_segment(pts: np.ndarray, a: np.ndarray, b: np.ndarray, eps: float) -> np.ndarray:
    ab = b - a
    L2 = ab @ ab
    ap = pts - a
    t = ap @ ab / L2
    dist = np.abs(ap[:, 0] * ab[1] - ap[:, 1] * ab[0]) / np.sqrt(L2)
    return (t > eps) & (t < 1.0 - eps) & (dist < eps * np.sqrt(L2))


def build_poly_mesh(vertices: Sequence, cells: Sequence[Sequence[int]]) -> PolyMesh:
    """Build faces, measures, centroids and normals from vertices and cells.

    Parameters
    ----------
    vertices
        Points in 1D (scalars or length-1 rows) or 2D.
    cells
        1D: vertex pairs ``(a, b)`` with ``x_a < x_b``; 2D: counterclockwise
        vertex loops.

    Raises
    ------
    MeshError
        On zero-measure cells, clockwise / inconsistently oriented cells, or
        non-conformal (hanging-node) input.
    """
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim == 1:
        verts = verts[:, None]
    dim = verts.shape[1]
    if dim not in (1, 2):
        raise MeshError(f"polytopal meshes are supported in 1D and 2D only, got {dim}D")
    cells_t = tuple(tuple(int(i) for i in c) for c in cells)
    if not cells_t:
        raise MeshError("mesh has no cells")
    for K, c in enumerate(cells_t):
        if min(c) < 0 or max(c) >= len(verts):
            raise MeshError(f"cell {K} references a vertex out of range")

    if dim == 1:
        return _build_1d(verts, cells_t)
    return _build_2d(verts, cells_t)


def _finalize(verts, cells_t, measures, centroids, raw_faces) -> PolyMesh:
    """Order faces deterministically and derive per-cell incidence.

    ``raw_faces`` entries are ``(vertex tuple, [cells], measure, center,
    normal out of the first cell)``.
    """
    order = sorted(
        range(len(raw_faces)),
        key=lambda i: (min(raw_faces[i][1]), tuple(raw_faces[i][3])),
    )
    nf = len(order)
    face_vertices = []
    face_cells = -np.ones((nf, 2), dtype=int)
    face_measures = np.empty(nf)
    face_centers = np.empty((nf, verts.shape[1]))
    face_normals = np.empty((nf, verts.shape[1]))
    per_cell: list[list[tuple[int, int]]] = [[] for _ in cells_t]
    for new, old in enumerate(order):
        fv, fc, meas, center, normal = raw_faces[old]
        fc_sorted = sorted(fc)
        if fc_sorted[0] != fc[0]:
            normal = -normal
        face_vertices.append(fv)
        face_cells[new, : len(fc_sorted)] = fc_sorted
        face_measures[new] = meas
        face_centers[new] = center
        face_normals[new] = normal
        per_cell[fc_sorted[0]].append((new, 1))
        if len(fc_sorted) == 2:
            per_cell[fc_sorted[1]].append((new, -1))

    cell_faces = tuple(_frozen(np.array([f for f, _ in pc], dtype=int)) for pc in per_cell)
    cell_signs = tuple(_frozen(np.array([s for _, s in pc], dtype=float)) for pc in per_cell)
    mesh = PolyMesh(
        vertices=_frozen(verts),
        cells=cells_t,
        cell_measures=_frozen(np.asarray(measures, dtype=float)),
        cell_centroids=_frozen(np.asarray(centroids, dtype=float)),
        face_vertices=tuple(face_vertices),
        face_cells=_frozen(face_cells),
        face_measures=_frozen(face_measures),
        face_centers=_frozen(face_centers),
        face_normals=_frozen(face_normals),
        cell_faces=cell_faces,
        cell_signs=cell_signs,
    )
    for K in range(mesh.n_cells):
        if mesh.closure_defect(K) > 1e-12:
            raise MeshError(f"cell {K} is not closed: sum |e| n_Ke = {mesh.closure_defect(K):.3e}")
    return mesh


def _build_1d(verts: np.ndarray, cells_t) -> PolyMesh:
    x = verts[:, 0]
    measures, centroids = [], []
    incidences: dict[int, list[tuple[int, float]]] = {}
    for K, c in enumerate(cells_t):
        if len(c) != 2:
            raise MeshError(f"1D cell {K} must have exactly two vertices")
        a, b = c
        length = x[b] - x[a]
        if length == 0.0:
            raise MeshError(f"cell {K} has zero length")
        if length < 0.0:
            raise MeshError(f"cell {K} is inconsistently oriented (x_a > x_b)")
        measures.append(length)
        centroids.append([0.5 * (x[a] + x[b])])
        incidences.setdefault(a, []).append((K, -1.0))
        incidences.setdefault(b, []).append((K, 1.0))

    raw = []
    for v, inc in incidences.items():
        if len(inc) > 2:
            raise MeshError(f"vertex {v} is shared by more than two cells")
        if len(inc) == 2 and inc[0][1] == inc[1][1]:
            raise MeshError(f"cells {inc[0][0]} and {inc[1][0]} overlap at vertex {v}")
        raw.append(((v,), [k for k, _ in inc], 1.0, np.array([x[v]]), np.array([inc[0][1]])))
    mesh = _finalize(verts, cells_t, measures, centroids, raw)
    if len(mesh.boundary_faces) != 2:
        raise MeshError("1D mesh must cover a single interval")
    return mesh


def _build_2d(verts: np.ndarray, cells_t) -> PolyMesh:
    measures, centroids = [], []
    edges: dict[tuple[int, int], list[tuple[int, tuple[int, int]]]] = {}
    for K, c in enumerate(cells_t):
        if len(c) < 3 or len(set(c)) != len(c):
            raise MeshError(f"cell {K} is not a simple polygon")
        area, centroid = _polygon_area_centroid(verts[list(c)])
        if area == 0.0 or abs(area) < 1e-14 * np.ptp(verts, axis=0).prod():
            raise MeshError(f"cell {K} has zero area")
        if area < 0.0:
            raise MeshError(f"cell {K} is inconsistently oriented (clockwise)")
        measures.append(area)
        centroids.append(centroid)
        for i in range(len(c)):
            a, b = c[i], c[(i + 1) % len(c)]
            edges.setdefault((min(a, b), max(a, b)), []).append((K, (a, b)))

    raw = []
    boundary_candidates = []
    for key, inc in edges.items():
        if len(inc) > 2:
            raise MeshError(f"edge {key} is shared by more than two cells")
        if len(inc) == 2 and inc[0][1] == inc[1][1]:
            raise MeshError(f"cells {inc[0][0]} and {inc[1][0]} traverse edge {key} in the same direction")
        a, b = inc[0][1]
        pa, pb = verts[a], verts[b]
        t = pb - pa
        length = float(np.hypot(t[0], t[1]))
        normal = np.array([t[1], -t[0]]) / length
        raw.append((key, [k for k, _ in inc], length, 0.5 * (pa + pb), normal))
        if len(inc) == 1:
            boundary_candidates.append(key)

    # a hanging node shows up as a vertex inside an unmatched edge
    scale = float(np.ptp(verts, axis=0).max())
    for a, b in boundary_candidates:
        hit = _on_open_segment(verts, verts[a], verts[b], 1e-12 * max(scale, 1.0))
        if hit.any():
            raise MeshError(
                f"non-conformal mesh: vertex {int(np.flatnonzero(hit)[0])} lies inside edge {(a, b)}"
            )
    return _finalize(verts, cells_t, measures, centroids, raw)


# }}}


# {{{ mesh generators


def interval_mesh(points: int | Sequence[float]) -> PolyMesh:
    """1D mesh of ``[0, 1]`` with ``n`` equal cells, or with the given breakpoints."""
    if np.isscalar(points):
        x = np.linspace(0.0, 1.0, int(points) + 1)
    else:
        x = np.asarray(points, dtype=float)
    return build_poly_mesh(x, [(i, i + 1) for i in range(len(x) - 1)])


def rectangle_mesh(nx: int, ny: int | None = None) -> PolyMesh:
    """Cartesian quadrilateral mesh of the unit square."""
    ny = nx if ny is None else ny
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    verts = np.array([[x, y] for y in ys for x in xs])

    def vid(i, j):
        return j * (nx + 1) + i

    cells = [
        (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1))
        for j in range(ny)
        for i in range(nx)
    ]
    return build_poly_mesh(verts, cells)


def triangle_mesh(n: int, pattern: str = "diagonal") -> PolyMesh:
    """Triangulated unit square on an ``n x n`` grid of squares.

    ``pattern="diagonal"`` splits each square along one diagonal (2n^2
    triangles); ``"crisscross"`` adds the square center and gives 4n^2.
    """
    xs = np.linspace(0.0, 1.0, n + 1)
    verts = [[x, y] for y in xs for x in xs]

    def vid(i, j):
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if pattern == "diagonal":
                cells += [(a, b, c), (a, c, d)]
            elif pattern == "crisscross":
                m = len(verts)
                verts.append([(i + 0.5) / n, (j + 0.5) / n])
                cells += [(a, b, m), (b, c, m), (c, d, m), (d, a, m)]
            else:
                raise ValueError(f"unknown triangulation pattern {pattern!r}")
    return build_poly_mesh(np.array(verts), cells)


# }}}


# {{{ centers and admissibility


@dataclass(frozen=True)
class Violation:
    face: int
    kind: str  # "internal" or "boundary"
    angle: float


@dataclass(frozen=True)
class AdmissibilityReport:
    """Faces whose center-to-center segment is not orthogonal to the face."""

    violations: tuple[Violation, ...]
    tol: float

    @property
    def admissible(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        lines = [f"{len(self.violations)} admissibility violation(s) at tol {self.tol:g} rad"]
        lines += [f"  face {v.face} ({v.kind}): angle defect {v.angle:.3e} rad" for v in self.violations]
        return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class CenteredMesh:
    """A :class:`PolyMesh` with cell centers, boundary-face centers and distances.

    ``face_points`` holds ``x_e`` for boundary faces and the face center for
    internal faces. ``cell_face_distances[K][i]`` is the distance from ``x_K``
    to the line of the ``i``-th face of ``K``.
    """

    base: PolyMesh
    cell_centers: np.ndarray
    face_points: np.ndarray
    face_distances: np.ndarray
    cell_face_distances: tuple[np.ndarray, ...]
    admissible: bool
    report: AdmissibilityReport = field(repr=False)

    def __getattr__(self, name):
        # geometric queries fall through to the underlying mesh
        if name == "base":
            raise AttributeError(name)
        return getattr(self.base, name)

    def describe(self) -> str:
        return self.base.describe()


def _point_in_cell(mesh: PolyMesh, K: int, x: np.ndarray, eps: float) -> bool:
    p = mesh.cell_vertices(K)
    if mesh.dim == 1:
        return bool(p[0, 0] + eps < x[0] < p[1, 0] - eps)
    # convex or not: outward-normal test is only valid for convex cells, so use winding
    inside = False
    n = len(p)
    for i in range(n):
        a, b = p[i], p[(i + 1) % n]
        cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0])
        seg = np.hypot(*(b - a))
        if abs(cross) <= eps * seg and min(a[0], b[0]) - eps <= x[0] <= max(a[0], b[0]) + eps \
                and min(a[1], b[1]) - eps <= x[1] <= max(a[1], b[1]) + eps:
            return False  # on the boundary of K
        if (a[1] > x[1]) != (b[1] > x[1]):
            xint = a[0] + (x[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if x[0] < xint:
                inside = not inside
    return inside


def _angle(seg: np.ndarray, normal: np.ndarray) -> float:
    dot = float(seg @ normal)
    if seg.size == 1:
        return 0.0 if dot > 0 else float(np.pi)
    cross = float(seg[0] * normal[1] - seg[1] * normal[0])
    return float(np.arctan2(abs(cross), dot))


def build_centered_mesh(
    mesh: PolyMesh,
    cell_centers: np.ndarray | None = None,
    boundary_face_centers: np.ndarray | None = None,
    tol: float = ADMISSIBILITY_TOL,
) -> CenteredMesh:
    """Attach centers to ``mesh`` and compute distances, flagging admissibility.

    Defaults are cell centroids and boundary-face midpoints. Unlike
    :func:`check_admissibility` this returns a :class:`CenteredMesh` even when
    orthogonality fails (``admissible=False``), which is what schemes that do
    not need it (RT0-lifting MFD) use.

    Raises
    ------
    MeshError
        If a cell center is not inside its cell, a boundary-face center is not
        on its face, or a distance ``d_e`` vanishes.
    """
    dim = mesh.dim
    bfaces = mesh.boundary_faces
    xK = mesh.cell_centroids.copy() if cell_centers is None else np.asarray(cell_centers, dtype=float).reshape(-1, dim)
    if len(xK) != mesh.n_cells:
        raise MeshError(f"expected {mesh.n_cells} cell centers, got {len(xK)}")
    xe_b = mesh.face_centers[bfaces].copy() if boundary_face_centers is None \
        else np.asarray(boundary_face_centers, dtype=float).reshape(-1, dim)
    if len(xe_b) != len(bfaces):
        raise MeshError(f"expected {len(bfaces)} boundary-face centers, got {len(xe_b)}")

    scale = float(np.ptp(mesh.vertices, axis=0).max())
    eps = 1e-13 * max(scale, 1.0)
    for K in range(mesh.n_cells):
        if not _point_in_cell(mesh, K, xK[K], eps):
            raise MeshError(f"center {xK[K].tolist()} of cell {K} is not inside the cell")

    face_points = mesh.face_centers.copy()
    for i, e in enumerate(bfaces):
        if dim == 2:
            a, b = (mesh.vertices[v] for v in mesh.face_vertices[e])
            t = (xe_b[i] - a) @ (b - a) / ((b - a) @ (b - a))
            off = abs((xe_b[i] - a) @ mesh.face_normals[e])
            if off > eps or not (-1e-13 <= t <= 1.0 + 1e-13):
                raise MeshError(f"center {xe_b[i].tolist()} of boundary face {e} is not on the face")
        elif not np.allclose(xe_b[i], mesh.face_centers[e]):
            raise MeshError(f"center of boundary face {e} must be the face point itself in 1D")
        face_points[e] = xe_b[i]

    d_e = np.empty(mesh.n_faces)
    violations = []
    for e in range(mesh.n_faces):
        K1, K2 = mesh.face_cells[e]
        n = mesh.face_normals[e]
        if K2 >= 0:
            seg, kind = xK[K2] - xK[K1], "internal"
        else:
            seg, kind = face_points[e] - xK[K1], "boundary"
        d_e[e] = float(np.linalg.norm(seg))
        if d_e[e] == 0.0:
            raise MeshError(f"distance d_e vanishes on face {e} (coincident centers)")
        ang = _angle(seg, n)
        if ang > tol:
            violations.append(Violation(face=int(e), kind=kind, angle=ang))

    cfd = tuple(
        _frozen(np.abs(np.einsum("ij,ij->i", face_points[faces] - xK[K], mesh.face_normals[faces])))
        for K, faces in enumerate(mesh.cell_faces)
    )
    report = AdmissibilityReport(violations=tuple(violations), tol=tol)
    if violations:
        logger.debug("mesh %s not admissible:\n%s", mesh.describe(), report)
    return CenteredMesh(
        base=mesh,
        cell_centers=_frozen(xK),
        face_points=_frozen(face_points),
        face_distances=_frozen(d_e),
        cell_face_distances=cfd,
        admissible=report.admissible,
        report=report,
    )


def check_admissibility(
    mesh: PolyMesh,
    cell_centers: np.ndarray | None = None,
    boundary_face_centers: np.ndarray | None = None,
    tol: float = ADMISSIBILITY_TOL,
) -> CenteredMesh | AdmissibilityReport:
    """Return a :class:`CenteredMesh` if the centers make ``mesh`` admissible,
    else the :class:`AdmissibilityReport` listing each violating face."""
    cm = build_centered_mesh(mesh, cell_centers, boundary_face_centers, tol)
    return cm if cm.admissible else cm.report


def require_admissible(mesh: PolyMesh | CenteredMesh) -> CenteredMesh:
    """Coerce to an admissible :class:`CenteredMesh` (centroid centers by default)."""
    cm = mesh if isinstance(mesh, CenteredMesh) else build_centered_mesh(mesh)
    if not cm.admissible:
        raise MeshError(f"mesh is not admissible\n{cm.report}")
    return cm


# }}}


# {{{ text format


def _data_lines(text: str):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def read_mesh(path: str | Path) -> tuple[PolyMesh, np.ndarray | None, np.ndarray | None]:
    """Read the line-oriented mesh format.

    Returns the mesh and, when a ``centers`` section is present, the cell
    centers and boundary-face centers (otherwise ``None, None``).
    """
    lines = list(_data_lines(Path(path).read_text()))
    pos = 0

    def section(name):
        nonlocal pos
        if pos >= len(lines) or lines[pos].lower() != name:
            raise MeshError(f"{path}: expected section {name!r}")
        count = int(lines[pos + 1])
        body = lines[pos + 2 : pos + 2 + count]
        if len(body) != count:
            raise MeshError(f"{path}: section {name!r} is truncated")
        pos += 2 + count
        return body

    verts = np.array([[float(t) for t in ln.split()] for ln in section("vertices")])
    cells = []
    for ln in section("cells"):
        tok = [int(t) for t in ln.split()]
        if tok[0] != len(tok) - 1:
            raise MeshError(f"{path}: cell line {ln!r} has a wrong vertex count")
        cells.append(tuple(tok[1:]))
    mesh = build_poly_mesh(verts, cells)

    if pos < len(lines) and lines[pos].lower() == "centers":
        pts = np.array([[float(t) for t in ln.split()] for ln in lines[pos + 1 :]])
        nb = len(mesh.boundary_faces)
        if len(pts) != mesh.n_cells + nb:
            raise MeshError(f"{path}: centers section needs {mesh.n_cells + nb} points, got {len(pts)}")
        return mesh, pts[: mesh.n_cells], pts[mesh.n_cells :]
    if pos < len(lines):
        raise MeshError(f"{path}: unexpected content {lines[pos]!r}")
    return mesh, None, None


def write_mesh(path: str | Path, mesh: PolyMesh | CenteredMesh) -> None:
    """Write ``mesh``; a :class:`CenteredMesh` also writes its ``centers`` section."""
    base = mesh.base if isinstance(mesh, CenteredMesh) else mesh
    out = ["# varcoherence mesh", "vertices", str(base.n_vertices)]
    out += [" ".join(repr(float(c)) for c in v) for v in base.vertices]
    out += ["cells", str(base.n_cells)]
    out += [" ".join(str(t) for t in (len(c), *c)) for c in base.cells]
    if isinstance(mesh, CenteredMesh):
        out += ["centers"]
        out += [" ".join(repr(float(c)) for c in p) for p in mesh.cell_centers]
        out += [" ".join(repr(float(c)) for c in mesh.face_points[e]) for e in base.boundary_faces]
    Path(path).write_text("\n".join(out) + "\n")


# }}}
