"""Verification studies shared by the command line and the test suite.

Each study is a pure function of its arguments (including the seed), so
repeated runs produce identical reports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fd, fem, fv, mfd
from .functional import CoherenceReport, coherence_check
from .mesh import (
    CenteredMesh,
    PolyMesh,
    build_cartesian_grid,
    build_centered_mesh,
    interval_mesh,
    read_mesh,
    rectangle_mesh,
    triangle_mesh,
)
from .problem import Diffusivity, LagrangianFn, ManufacturedCase, constant_field, manufactured_case, poisson_lagrangian

SCHEMES = ("fd", "fem", "fv", "mfd")
MESH_KINDS = ("interval", "cart2d", "tri2d", "crisscross")


# {{{ meshes and problems


def named_mesh(kind: str, n: int) -> PolyMesh:
    """Unit-domain meshes with ``n`` cells per direction."""
    if kind == "interval":
        return interval_mesh(n)
    if kind == "cart2d":
        return rectangle_mesh(n)
    if kind == "tri2d":
        return triangle_mesh(n)
    if kind == "crisscross":
        return triangle_mesh(n, "crisscross")
    raise ValueError(f"unknown mesh kind {kind!r}; choose from {MESH_KINDS}")


def default_mesh_kind(scheme: str, dim: int, mode: str = "rt0") -> str:
    if dim == 1:
        return "interval"
    if scheme == "fv" or (scheme == "mfd" and mode == "diagonal"):
        return "cart2d"
    return "tri2d"


def load_mesh(path: str) -> CenteredMesh:
    """Read a mesh file; stored centers are used when present."""
    mesh, centers, bcenters = read_mesh(path)
    return build_centered_mesh(mesh, centers, bcenters)


def default_problem(d: int, case: str | None) -> tuple[LagrangianFn, ManufacturedCase | None]:
    """Poisson with ``f = 1`` and ``alpha = I`` unless a manufactured case is named."""
    if case is None:
        return poisson_lagrangian(constant_field(1.0), Diffusivity.identity(d)), None
    mc = manufactured_case(case)
    if mc.d != d:
        raise ValueError(f"case {case!r} is {mc.d}-dimensional, not {d}-dimensional")
    return mc.lagrangian(), mc


# }}}


# {{{ coherence


def coherence_fd(L: LagrangianFn, d: int, N: int, probes: int = 10, seed: int = 0, tol: float = 1e-12,
                 stencil: str = "forward") -> CoherenceReport:
    grid = build_cartesian_grid(d, N)
    F = fd.fd_lagrangian(L, grid, stencil)
    return coherence_check(
        F, lambda u: fd.fd_el_residual(L, grid, u, stencil).ravel(), np.full(grid.n_nodes, grid.h**d),
        probes=probes, seed=seed, tol=tol, scheme="fd", mesh=f"grid d={d} N={N}",
    )


def coherence_fem(L: LagrangianFn, mesh: PolyMesh, name: str, probes: int = 10, seed: int = 0,
                  tol: float = 1e-12, quad: int = 1) -> CoherenceReport:
    space = fem.build_p1_space(mesh, quad)
    F = fem.fem_lagrangian(L, space)
    return coherence_check(
        F, lambda u: fem.fem_weak_residual(L, space, u), np.ones(space.n_nodes),
        probes=probes, seed=seed, tol=tol, scheme="fem", mesh=name,
    )


def coherence_fv(f, mesh, name: str, probes: int = 10, seed: int = 0, tol: float = 1e-12,
                 quad: int = 1) -> CoherenceReport:
    F = fv.fv_lagrangian(f, mesh, quad)
    If = fv.fv_interpolate(f, mesh, quad)
    measures = (mesh.base if isinstance(mesh, CenteredMesh) else mesh).cell_measures
    return coherence_check(
        F, lambda u: If + fv.fv_laplacian(mesh, u), -measures,
        probes=probes, seed=seed, tol=tol, scheme="fv", mesh=name,
    )


def coherence_mfd(alpha: Diffusivity, f, mesh, name: str, mode: str = "rt0", probes: int = 10, seed: int = 0,
                  tol: float = 1e-10) -> CoherenceReport:
    disc = mfd.mfd_discretize(mesh, alpha, f, mode)
    return coherence_check(
        mfd.mfd_hamiltonian(disc), lambda x: mfd.mfd_residual(disc, x), mfd.mfd_coherence_mass(disc),
        probes=probes, seed=seed, tol=tol, scheme=f"mfd-{mode}", mesh=name,
    )


def run_coherence(scheme: str, ns, dim: int = 2, case: str | None = None, mesh_kind: str | None = None,
                  mesh_file: str | None = None, mode: str = "rt0", stencil: str = "forward",
                  probes: int = 10, seed: int = 0, tol: float | None = None) -> list[CoherenceReport]:
    """One coherence report per resolution (or one for a mesh file)."""
    if mesh_file is not None:
        cm = load_mesh(mesh_file)
        dim = cm.dim
    L, mc = default_problem(dim, case)
    alpha = L.poisson.alpha
    f = L.poisson.f
    if tol is None:
        tol = 1e-10 if scheme == "mfd" else 1e-12

    if scheme == "fd":
        if mesh_file is not None:
            raise ValueError("finite differences run on Cartesian grids; --mesh does not apply")
        return [coherence_fd(L, dim, n, probes, seed, tol, stencil) for n in ns]

    if mesh_file is not None:
        meshes = [(cm, mesh_file)]
    else:
        kind = mesh_kind or default_mesh_kind(scheme, dim, mode)
        meshes = [(named_mesh(kind, n), f"{kind} n={n}") for n in ns]
        if meshes and meshes[0][0].dim != dim:
            raise ValueError(f"mesh kind {kind!r} is not {dim}-dimensional")

    out = []
    for mesh, name in meshes:
        if scheme == "fem":
            base = mesh.base if isinstance(mesh, CenteredMesh) else mesh
            out.append(coherence_fem(L, base, name, probes, seed, tol))
        elif scheme == "fv":
            out.append(coherence_fv(f, mesh, name, probes, seed, tol))
        elif scheme == "mfd":
            out.append(coherence_mfd(alpha, f, mesh, name, mode, probes, seed, tol))
        else:
            raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    return out


# }}}


# {{{ Green-Gauss


@dataclass(frozen=True)
class GreenGaussResult:
    scheme: str
    mesh: str
    probes: int
    max_rel: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel <= self.tol

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "mesh": self.mesh, "probes": self.probes,
                "max_rel": self.max_rel, "tol": self.tol, "pass": self.passed}


def green_gauss_fd(d: int, N: int, probes: int = 20, seed: int = 0, tol: float = 1e-12,
                   stencil: str = "forward") -> GreenGaussResult:
    grid = build_cartesian_grid(d, N)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        u = np.where(grid.interior_mask(), rng.uniform(-1.0, 1.0, grid.shape), 0.0)
        p = rng.uniform(-1.0, 1.0, grid.shape + (d,))
        worst = max(worst, fd.fd_green_gauss_defect(grid, u, p, stencil))
    return GreenGaussResult("fd", f"grid d={d} N={N}", probes, worst, tol)


def green_gauss_fv(mesh, name: str, probes: int = 20, seed: int = 0, tol: float = 1e-12,
                   break_continuity: bool = False) -> GreenGaussResult:
    """Random cell values against random continuous flux distributions.

    ``break_continuity`` perturbs the second-side value on every internal face
    (negative control); the identity is then evaluated without the
    continuity guard.
    """
    cm = mesh if isinstance(mesh, CenteredMesh) else build_centered_mesh(mesh)
    m = cm.base
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        u = rng.uniform(-1.0, 1.0, m.n_cells)
        F = fv.FluxDistribution.from_canonical(m, rng.uniform(-1.0, 1.0, m.n_faces))
        if break_continuity:
            vals = F.values.copy()
            vals[m.internal_faces, 1] += rng.uniform(0.5, 1.0, len(m.internal_faces))
            F = fv.FluxDistribution(m, vals)
        worst = max(worst, fv.fv_green_gauss_defect(cm, F, u, check_continuity=not break_continuity))
    return GreenGaussResult("fv", name, probes, worst, tol)


def run_green_gauss(scheme: str, ns, dims=(1, 2, 3), mesh_kind: str | None = None, mesh_file: str | None = None,
                    stencil: str = "forward", probes: int = 20, seed: int = 0, tol: float = 1e-12,
                    break_continuity: bool = False) -> list[GreenGaussResult]:
    if scheme == "fd":
        return [green_gauss_fd(d, n, probes, seed, tol, stencil) for d in dims for n in ns]
    if scheme != "fv":
        raise ValueError("the Green-Gauss suite covers the fd and fv schemes")
    if mesh_file is not None:
        return [green_gauss_fv(load_mesh(mesh_file), mesh_file, probes, seed, tol, break_continuity)]
    out = []
    for d in dims:
        kind = mesh_kind or default_mesh_kind("fv", d)
        out += [green_gauss_fv(named_mesh(kind, n), f"{kind} n={n}", probes, seed, tol, break_continuity)
                for n in ns]
    return out


# }}}


# {{{ convergence


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    h: float
    err_L2: float
    err_max: float
    observed_order: float | None = None
    err_flux: float | None = None
    flux_order: float | None = None


def _order(e_coarse: float, e_fine: float, h_coarse: float, h_fine: float) -> float:
    return float(np.log(e_coarse / e_fine) / np.log(h_coarse / h_fine))


def _errors_fd(mc: ManufacturedCase, n: int, stencil: str):
    grid = build_cartesian_grid(mc.d, n)
    u = fd.fd_solve(mc.lagrangian(), grid, stencil=stencil)
    err = u - mc.u(grid.nodes())
    return grid.h, float(np.sqrt(np.sum(err**2) * grid.h**mc.d)), float(np.abs(err).max()), None


def _errors_fem(mc: ManufacturedCase, mesh: PolyMesh, n: int):
    # refined load quadrature so that the load integrals are (nearly) exact
    space = fem.build_p1_space(mesh, quad=3)
    u = fem.fem_solve(mc.lagrangian(), space)
    err_max = float(np.abs(u - mc.u(space.nodes)).max())
    return 1.0 / n, fem.fem_l2_error(space, u, mc.u, quad=4), err_max, None


def _errors_fv(mc: ManufacturedCase, mesh: PolyMesh, n: int):
    cm = build_centered_mesh(mesh)
    u = fv.fv_solve(mc.f, cm)
    err = u - mc.u(cm.cell_centers)
    return 1.0 / n, float(np.sqrt(np.sum(cm.cell_measures * err**2))), float(np.abs(err).max()), None


def _errors_mfd(mc: ManufacturedCase, mesh: PolyMesh, n: int, mode: str):
    disc = mfd.mfd_discretize(mesh, mc.alpha, mc.f, mode)
    state = mfd.mfd_solve(disc, mc.alpha, mc.f)
    err = state.u - mc.u(disc.mesh.cell_centers)
    dp = state.p - mfd.mfd_interpolate_flux(mc.flux, mesh, quad=3)
    err_flux = float(np.sqrt(dp @ (disc.M @ dp)))
    return 1.0 / n, float(np.sqrt(np.sum(disc.measures * err**2))), float(np.abs(err).max()), err_flux


def convergence_study(scheme: str, case: str, ns, mesh_kind: str | None = None, mode: str = "rt0",
                      stencil: str = "forward") -> list[ConvergenceRow]:
    """Errors against the analytic solution and observed orders between consecutive rows.

    ``err_L2`` is the discrete (nodal or cell-center) L2 norm for fd, fv and
    mfd and the continuous L2 norm for fem; ``err_flux`` (mfd) is the
    ``W_h``-norm of ``p_h - I(alpha grad u)``.
    """
    mc = manufactured_case(case)
    kind = None if scheme == "fd" else (mesh_kind or default_mesh_kind(scheme, mc.d, mode))
    rows: list[ConvergenceRow] = []
    for n in ns:
        if scheme == "fd":
            h, e2, emax, ef = _errors_fd(mc, n, stencil)
        else:
            mesh = named_mesh(kind, n)
            if mesh.dim != mc.d:
                raise ValueError(f"mesh kind {kind!r} does not match the {mc.d}-dimensional case {case!r}")
            if scheme == "fem":
                h, e2, emax, ef = _errors_fem(mc, mesh, n)
            elif scheme == "fv":
                h, e2, emax, ef = _errors_fv(mc, mesh, n)
            elif scheme == "mfd":
                h, e2, emax, ef = _errors_mfd(mc, mesh, n, mode)
            else:
                raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
        order = flux_order = None
        if rows:
            prev = rows[-1]
            order = _order(prev.err_L2, e2, prev.h, h)
            if ef is not None:
                flux_order = _order(prev.err_flux, ef, prev.h, h)
        rows.append(ConvergenceRow(n, h, e2, emax, order, ef, flux_order))
    return rows


def convergence_csv(rows: list[ConvergenceRow]) -> str:
    flux = rows and rows[0].err_flux is not None
    cols = ["n", "h", "err_L2", "err_max", "observed_order"] + (["err_flux", "flux_order"] if flux else [])

    def fmt(v):
        return "" if v is None else repr(v) if isinstance(v, float) else str(v)

    lines = [",".join(cols)]
    for r in rows:
        vals = [r.n, r.h, r.err_L2, r.err_max, r.observed_order]
        if flux:
            vals += [r.err_flux, r.flux_order]
        lines.append(",".join(fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


# }}}
