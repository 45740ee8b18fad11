import math

import numpy as np
import pytest

from plasma_branch.errors import BracketError, DomainError, SingularSystemError
from plasma_branch.radial import (
    RadialField,
    TridiagonalLU,
    ball_geometry,
    ball_integral,
    cell_volumes,
    face_conductances,
    find_root_bracketed,
    hermite_second_derivative,
    make_grid,
    simpson_weights,
    solve_bordered,
    solve_tridiagonal,
    stiffness,
)


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_unit_volume(N):
    g = ball_geometry(N)
    assert g.omega_N * g.R_N**N == pytest.approx(1.0, rel=1e-15)


def test_planar_radius_and_exponents():
    g2, g3, g4 = ball_geometry(2), ball_geometry(3), ball_geometry(4)
    assert g2.R_N == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    assert g2.p_critical == math.inf
    assert g3.p_critical == 3.0 and g3.p_sobolev == 5.0
    assert g4.p_critical == 2.0 and g4.p_sobolev == 3.0
    # torsion: psi0 = (R^2 - r^2)/(2N), half its integral
    assert g2.torsion_energy == pytest.approx(1 / (16 * math.pi), rel=1e-15)


@pytest.mark.parametrize("bad", [1, 2.5, 0, "x", True])
def test_geometry_rejects_bad_dimension(bad):
    with pytest.raises(DomainError):
        ball_geometry(bad)


def test_branch_exponent_window():
    g3 = ball_geometry(3)
    g3.check_branch_exponent(2.9)
    for p in (1.0, 3.0, 0.5):
        with pytest.raises(DomainError):
            g3.check_branch_exponent(p)
    ball_geometry(2).check_branch_exponent(50.0)


def test_grid_validation():
    with pytest.raises(DomainError):
        make_grid(2, 1.0, 64)
    with pytest.raises(DomainError):
        make_grid(2, 1.0, 63)
    with pytest.raises(DomainError):
        make_grid(2, -1.0, 65)
    grid = make_grid(3, 2.0, 65)
    assert grid.nodes[0] == 0.0 and grid.nodes[-1] == 2.0
    assert grid.refine().n == 129
    assert grid.refine().h == pytest.approx(grid.h / 2)
    with pytest.raises(ValueError):
        grid.nodes[3] = 1.0


def test_field_shape_checked():
    grid = make_grid(2, 1.0, 65)
    with pytest.raises(DomainError):
        RadialField(grid, np.zeros(64))
    f = RadialField(grid, -grid.nodes)
    assert f.sup_norm() == 1.0


@pytest.mark.parametrize("N", [2, 3, 4])
def test_simpson_exact_for_cubic_integrands(N):
    # r^(N-1) f(r) of degree <= 3 in r integrates exactly
    grid = make_grid(N, 0.7, 65)
    r = grid.nodes
    deg = 3 - (N - 1)
    for k in range(deg + 1):
        exact = N * ball_geometry(N).omega_N * 0.7 ** (N + k) / (N + k)
        assert ball_integral(grid, r**k) == pytest.approx(exact, rel=1e-13)


def test_simpson_fourth_order():
    # integral over the unit-volume disk of cos(r): 2 pi (R sin R + cos R - 1)
    g = ball_geometry(2)
    exact = 2 * math.pi * (g.R_N * math.sin(g.R_N) + math.cos(g.R_N) - 1)
    errs = []
    for n in (65, 129, 257):
        grid = make_grid(2, g.R_N, n)
        errs.append(abs(ball_integral(grid, np.cos(grid.nodes)) - exact))
    assert errs[0] / errs[1] > 14 and errs[1] / errs[2] > 14
    w = simpson_weights(make_grid(2, g.R_N, 65))
    assert w.sum() == pytest.approx(1.0, rel=1e-13)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_finite_volume_pieces(N):
    g = ball_geometry(N)
    grid = make_grid(N, g.R_N, 129)
    assert cell_volumes(grid).sum() == pytest.approx(1.0, rel=1e-14)
    lo, d, up = stiffness(grid)
    np.testing.assert_array_equal(lo, up)
    # constants are in the kernel of the Neumann operator
    y = d.copy()
    y[1:] += lo
    y[:-1] += up
    assert np.max(np.abs(y)) <= 1e-12 * d.max()
    c = face_conductances(grid)
    assert np.all(c > 0)
    # quadratic exactness: -Laplace of r^2 is -2N
    r = grid.nodes
    vals = r**2
    lap = d * vals
    lap[1:] += lo * vals[:-1]
    lap[:-1] += up * vals[1:]
    vol = cell_volumes(grid)
    np.testing.assert_allclose(lap[:-1] / vol[:-1], -2 * N, rtol=1e-9)


def test_stiffness_angular_mode_adds_centrifugal():
    grid = make_grid(3, 1.0, 65)
    _, d0, _ = stiffness(grid, 0)
    _, d2, _ = stiffness(grid, 2)
    vol = cell_volumes(grid)
    r = grid.nodes
    np.testing.assert_allclose((d2 - d0)[1:], vol[1:] * 2 * 3 / r[1:] ** 2, rtol=1e-13)


def test_tridiagonal_matches_dense():
    rng = np.random.default_rng(3)
    n = 40
    lo, up = rng.normal(size=n - 1), rng.normal(size=n - 1)
    d = rng.normal(size=n)
    A = np.diag(d) + np.diag(lo, -1) + np.diag(up, 1)
    b = rng.normal(size=(n, 2))
    x = TridiagonalLU(lo, d, up).solve(b)
    np.testing.assert_allclose(A @ x, b, atol=1e-10)
    np.testing.assert_allclose(solve_tridiagonal(lo, d, up, b[:, 0]), np.linalg.solve(A, b[:, 0]), rtol=1e-9)
    np.testing.assert_allclose(TridiagonalLU(lo, d, up).matvec(b[:, 0]), A @ b[:, 0])


def test_tridiagonal_singular_raises():
    with pytest.raises(SingularSystemError):
        TridiagonalLU(np.ones(2), np.array([1.0, 2.0, 1.0]), np.ones(2))
    with pytest.raises(SingularSystemError):
        TridiagonalLU(np.ones(1), np.ones(2), np.ones(1))
    with pytest.raises(DomainError):
        TridiagonalLU(np.ones(2), np.ones(3), np.ones(3))


def test_bordered_matches_dense():
    rng = np.random.default_rng(5)
    n = 30
    lo = -np.ones(n - 1)
    d = 4 + rng.random(n)
    col, row = rng.normal(size=n), rng.normal(size=n)
    A = np.diag(d) + np.diag(lo, -1) + np.diag(lo, 1)
    M = np.block([[A, col[:, None]], [row[None, :], np.array([[2.5]])]])
    rhs = rng.normal(size=n + 1)
    x, y = solve_bordered(TridiagonalLU(lo, d, lo), col, row, 2.5, rhs[:-1], rhs[-1])
    np.testing.assert_allclose(np.append(x, y), np.linalg.solve(M, rhs), rtol=1e-10, atol=1e-12)


def test_bordered_singular_schur():
    lu = TridiagonalLU(np.zeros(1), np.ones(2), np.zeros(1))
    with pytest.raises(SingularSystemError):
        solve_bordered(lu, np.ones(2), np.ones(2), 2.0, np.zeros(2), 0.0)


def test_root_finder():
    root = find_root_bracketed(math.cos, 0.0, 3.0, 1e-14)
    assert root == pytest.approx(math.pi / 2, abs=1e-14)
    root = find_root_bracketed(lambda x: x**3 - 2, 0.0, 2.0, 1e-15, fprime=lambda x: 3 * x * x)
    assert root == pytest.approx(2 ** (1 / 3), abs=2e-15)
    with pytest.raises(BracketError):
        find_root_bracketed(lambda x: x * x + 1, -1.0, 1.0, 1e-12)
    with pytest.raises(BracketError):
        find_root_bracketed(lambda x: math.nan, -1.0, 1.0, 1e-12)


def test_hermite_stencil_fourth_order():
    errs = []
    for n in (33, 65):
        x = np.linspace(0, 1, n)
        d2 = hermite_second_derivative(np.sin(x), np.cos(x), x[1])
        errs.append(np.max(np.abs(d2 + np.sin(x[1:-1]))))
    assert errs[0] / errs[1] > 14
