import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varcoherence.fd import (
    div_h,
    fd_el_residual,
    fd_green_gauss_defect,
    fd_lagrangian,
    fd_solve,
    grad_h,
    gradient_matrix,
    poisson_system,
    write_nodal_csv,
)
from varcoherence.functional import coherence_check, find_extremal
from varcoherence.mesh import build_cartesian_grid
from varcoherence.problem import constant_field, manufactured_case, poisson_lagrangian

STENCILS = ["forward", "backward"]


def test_grad_hand():
    g = build_cartesian_grid(1, 2)
    np.testing.assert_allclose(grad_h(g, np.array([0.0, 1.0, 0.0]))[:, 0], [2.0, -2.0, 0.0])
    np.testing.assert_array_equal(grad_h(g, np.zeros(3)), 0.0)


def test_grad_constant_boundary_term():
    g = build_cartesian_grid(1, 4)
    gu = grad_h(g, np.full(5, 3.0))[:, 0]
    np.testing.assert_allclose(gu[:4], 0.0)
    assert gu[4] == pytest.approx(-3.0 / g.h)


def test_div_hand():
    g = build_cartesian_grid(1, 2)
    assert div_h(g, np.array([[2.0], [-2.0], [0.0]]))[1] == pytest.approx(-8.0)
    np.testing.assert_array_equal(div_h(g, np.zeros((3, 1))), 0.0)
    assert div_h(g, grad_h(g, np.array([0.0, 1.0, 0.0])))[1] == pytest.approx(-8.0)


@pytest.mark.parametrize("stencil", STENCILS)
def test_laplacian_five_point(stencil, rng):
    g = build_cartesian_grid(2, 6)
    u = np.where(g.interior_mask(), rng.uniform(-1, 1, g.shape), 0.0)
    lap = div_h(g, grad_h(g, u, stencil), stencil)
    ref = np.zeros_like(u)
    ref[1:-1, 1:-1] = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4 * u[1:-1, 1:-1]) / g.h**2
    np.testing.assert_allclose(lap[1:-1, 1:-1], ref[1:-1, 1:-1], rtol=1e-12, atol=1e-10)


def test_green_gauss_requires_vh():
    g = build_cartesian_grid(1, 4)
    with pytest.raises(ValueError):
        fd_green_gauss_defect(g, np.ones(5), np.ones((5, 1)))
    assert fd_green_gauss_defect(g, np.zeros(5), np.ones((5, 1))) == 0.0


@pytest.mark.parametrize("stencil", STENCILS)
@pytest.mark.parametrize("d,N,tol", [(1, 8, 1e-14), (2, 5, 1e-13), (3, 4, 1e-13)])
def test_green_gauss_random(d, N, tol, stencil, rng):
    g = build_cartesian_grid(d, N)
    for _ in range(10):
        u = np.where(g.interior_mask(), rng.uniform(-1, 1, g.shape), 0.0)
        p = rng.uniform(-1, 1, g.shape + (d,))
        assert fd_green_gauss_defect(g, u, p, stencil) <= tol


def test_centered_pair_fails_green_gauss(rng):
    """Negative control: the centered gradient with the forward/backward divergence is not adjoint."""
    g = build_cartesian_grid(1, 6)
    u = np.where(g.interior_mask(), rng.uniform(-1, 1, g.shape), 0.0)
    p = rng.uniform(-1, 1, g.shape + (1,))
    centered = 0.5 * (grad_h(g, u, "forward") + grad_h(g, u, "backward"))
    lhs = np.sum(p * centered) * g.h
    rhs = -np.sum(div_h(g, p, "forward") * u) * g.h
    assert abs(lhs - rhs) > 1e-3


@pytest.mark.parametrize("stencil", STENCILS)
@pytest.mark.parametrize("d,N", [(1, 5), (2, 4), (2, 6), (3, 3)])
def test_matrix_adjointness(d, N, stencil):
    """-div_h restricted to interior rows equals G^T on interior columns (dense construction)."""
    g = build_cartesian_grid(d, N)
    G = gradient_matrix(g, stencil).toarray()
    n = g.n_nodes
    D = np.empty((n, n * d))
    for k in range(n * d):
        e = np.zeros(n * d)
        e[k] = 1.0
        D[:, k] = div_h(g, e.reshape(g.shape + (d,)), stencil).ravel()
    free = g.interior_mask().ravel()
    np.testing.assert_allclose(-D[free], G.T[free], atol=1e-12 / g.h)
    # and the matrix agrees with grad_h
    u = np.arange(n, dtype=float)
    np.testing.assert_allclose(G @ u, grad_h(g, u.reshape(g.shape), stencil).ravel(), atol=1e-12)


def test_residual_hand():
    L = poisson_lagrangian(1.0, d=1)
    g = build_cartesian_grid(1, 2)
    r = fd_el_residual(L, g, np.array([0.0, 0.125, 0.0]))
    np.testing.assert_allclose(r, 0.0, atol=1e-15)
    np.testing.assert_array_equal(fd_el_residual(poisson_lagrangian(0.0, d=1), g, np.zeros(3)), 0.0)


def test_residual_dense_stencil_oracle(rng):
    f = lambda x: np.cos(x[..., 0]) * x[..., 1]  # noqa: E731
    L = poisson_lagrangian(f, d=2)
    g = build_cartesian_grid(2, 4)
    u = np.where(g.interior_mask(), rng.uniform(-1, 1, g.shape), 0.0)
    n = g.N + 1
    # dense 5-point matrix built node by node
    A = np.zeros((n * n, n * n))
    for i in range(1, n - 1):
        for j in range(1, n - 1):
            row = i * n + j
            A[row, row] = -4
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                A[row, (i + di) * n + j + dj] = 1
    ref = -f(g.nodes()).ravel() - A @ u.ravel() / g.h**2
    r = fd_el_residual(L, g, u).ravel()
    free = g.interior_mask().ravel()
    np.testing.assert_allclose(r[free], ref[free], rtol=1e-12, atol=1e-11)


def test_lagrangian_hand():
    L = poisson_lagrangian(1.0, d=1)
    g = build_cartesian_grid(1, 2)
    F = fd_lagrangian(L, g)
    u = np.array([0.0, 0.125, 0.0])
    assert F(u) == pytest.approx(-1 / 32, abs=1e-15)
    np.testing.assert_allclose(F.grad(u), 0.0, atol=1e-15)
    assert fd_lagrangian(poisson_lagrangian(0.0, d=1), g)(np.zeros(3)) == 0.0


@pytest.mark.parametrize("stencil", STENCILS)
@pytest.mark.parametrize("d,N", [(1, 3), (1, 8), (2, 5), (3, 3)])
def test_coherence_poisson(d, N, stencil):
    L = poisson_lagrangian(lambda x: 1 + x[..., 0], d=d)
    g = build_cartesian_grid(d, N)
    r = coherence_check(fd_lagrangian(L, g, stencil), lambda u: fd_el_residual(L, g, u, stencil).ravel(),
                        np.full(g.n_nodes, g.h**d), probes=10)
    assert r.max_rel <= 1e-12


@pytest.mark.parametrize("d", [1, 2])
def test_coherence_nonlinear(d, nonlinear_lagrangian):
    L = nonlinear_lagrangian(d)
    g = build_cartesian_grid(d, 5)
    r = coherence_check(fd_lagrangian(L, g), lambda u: fd_el_residual(L, g, u).ravel(),
                        np.full(g.n_nodes, g.h**d), probes=10)
    assert r.max_rel <= 1e-12


def test_poisson_system_spd():
    A, _ = poisson_system(poisson_lagrangian(1.0, d=2), build_cartesian_grid(2, 5))
    Ad = A.toarray()
    np.testing.assert_allclose(Ad, Ad.T, atol=1e-14)
    assert np.linalg.eigvalsh(Ad).min() > 0


def test_solve_quad1d():
    mc = manufactured_case("quad1d")
    u = fd_solve(mc.lagrangian(), build_cartesian_grid(1, 2))
    assert u[1] == pytest.approx(0.125, abs=1e-12)
    np.testing.assert_array_equal(fd_solve(poisson_lagrangian(0.0, d=1), build_cartesian_grid(1, 6)), 0.0)


def test_solve_paths_agree(nonlinear_lagrangian):
    g = build_cartesian_grid(2, 6)
    L = poisson_lagrangian(lambda x: np.sin(3 * x[..., 0]), d=2)
    u_lin = fd_solve(L, g)
    u_var = find_extremal(fd_lagrangian(L, g), np.zeros(g.n_nodes)).reshape(g.shape)
    np.testing.assert_allclose(u_var, u_lin, rtol=1e-8, atol=1e-12)
    # nonlinear path: residual of the discrete Euler-Lagrange equation vanishes
    Ln = nonlinear_lagrangian(1)
    g1 = build_cartesian_grid(1, 10)
    u = fd_solve(Ln, g1)
    assert np.abs(fd_el_residual(Ln, g1, u)).max() <= 1e-9


def test_sin1d_error_ratio():
    mc = manufactured_case("sin1d")
    errs = []
    for N in (16, 32):
        g = build_cartesian_grid(1, N)
        u = fd_solve(mc.lagrangian(), g)
        errs.append(np.sqrt(np.sum((u - mc.u(g.nodes())) ** 2) * g.h))
    assert 3.6 <= errs[0] / errs[1] <= 4.4


def test_nodal_csv(tmp_path):
    g = build_cartesian_grid(2, 2)
    write_nodal_csv(tmp_path / "u.csv", g, np.arange(9.0))
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "j1,j2,x1,x2,u"
    assert len(lines) == 10
    assert lines[2] == "0,1,0.0,0.5,1.0"


@settings(max_examples=25, deadline=None)
@given(d=st.integers(1, 3), N=st.integers(1, 5), seed=st.integers(0, 2**32 - 1),
       stencil=st.sampled_from(STENCILS))
def test_green_gauss_property(d, N, seed, stencil):
    g = build_cartesian_grid(d, N)
    rng = np.random.default_rng(seed)
    u = np.where(g.interior_mask(), rng.uniform(-1, 1, g.shape), 0.0)
    p = rng.uniform(-1, 1, g.shape + (d,))
    assert fd_green_gauss_defect(g, u, p, stencil) <= 1e-13
