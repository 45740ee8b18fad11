"""Radial grids, ball quadrature and the small linear-algebra kernels.

Every radial function on a ball of dimension N is stored as samples on a
uniform grid of ``[0, outer_radius]``.  Integrals over the ball carry the
surface measure ``N * omega_N * r**(N-1)``.

Two discretizations of the radial Laplacian live here:

* :func:`simpson_weights` gives composite-Simpson weights for plain
  quadrature of smooth data.
* :func:`cell_volumes` and :func:`stiffness` give a conservative
  finite-volume operator.  Node ``i`` owns the shell between the midpoints
  ``r_{i-1/2}`` and ``r_{i+1/2}``, where node 0 owns ``[0, h/2]`` and the last
  node owns ``[R - h/2, R]``.  The shell volumes sum to the exact ball volume
  and the stiffness matrix is symmetric, so discrete Green identities hold to
  round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import BracketError, DomainError, SingularSystemError

__all__ = [
    "BallGeometry",
    "RadialGrid",
    "RadialField",
    "ball_geometry",
    "make_grid",
    "simpson_weights",
    "ball_integral",
    "hermite_second_derivative",
    "cell_volumes",
    "face_conductances",
    "stiffness",
    "TridiagonalLU",
    "solve_tridiagonal",
    "solve_bordered",
    "find_root_bracketed",
]

PIVOT_RTOL = 1e-14


@dataclass(frozen=True)
class BallGeometry:
    """The unit-volume ball in dimension ``dim``.

    ``omega_N`` is the volume of the unit ball and ``R_N`` the radius for
    which ``omega_N * R_N**dim == 1``.
    """

    dim: int
    omega_N: float
    R_N: float

    @property
    def surface(self):
        """Area of the unit sphere, ``N * omega_N``."""
        return self.dim * self.omega_N

    @property
    def p_critical(self):
        """``N/(N-2)``, or ``inf`` in the plane."""
        return math.inf if self.dim == 2 else self.dim / (self.dim - 2)

    @property
    def p_sobolev(self):
        """``(N+2)/(N-2)``, or ``inf`` in the plane."""
        return math.inf if self.dim == 2 else (self.dim + 2) / (self.dim - 2)

    @property
    def torsion_energy(self):
        """Half the torsional rigidity, ``R_N**2 / (2N(N+2))``."""
        N = self.dim
        return self.R_N**2 / (2 * N * (N + 2))

    def check_branch_exponent(self, p):
        """Raise unless ``1 < p < N/(N-2)``."""
        if not (p > 1.0 and p < self.p_critical):
            raise DomainError(
                f"exponent p={p!r} outside (1, {self.p_critical}) for N={self.dim}"
            )


def _is_integer(x):
    return isinstance(x, (int, np.integer, float)) and not isinstance(x, bool) and x == int(x)


def ball_geometry(dim):
    if not _is_integer(dim) or dim < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {dim!r}")
    dim = int(dim)
    omega = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
    if dim == 2:
        R = 1.0 / math.sqrt(math.pi)
    else:
        R = omega ** (-1.0 / dim)
    return BallGeometry(dim=dim, omega_N=omega, R_N=R)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform nodes ``0 = r_0 < ... < r_{n-1} = outer_radius``."""

    dim: int
    outer_radius: float
    nodes: np.ndarray
    n: int

    @property
    def h(self):
        return self.outer_radius / (self.n - 1)

    @property
    def geometry(self):
        return ball_geometry(self.dim)

    def refine(self):
        """Grid with the spacing halved and the same endpoints."""
        return make_grid(self.dim, self.outer_radius, 2 * self.n - 1)

    def __len__(self):
        return self.n


def make_grid(dim, outer_radius, n):
    if not _is_integer(dim) or dim < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {dim!r}")
    if int(n) != n or n < 64 or n % 2 == 0:
        raise DomainError(f"node count must be odd and >= 64, got {n!r}")
    if not (outer_radius > 0 and math.isfinite(outer_radius)):
        raise DomainError(f"outer radius must be positive, got {outer_radius!r}")
    n = int(n)
    nodes = np.arange(n, dtype=float) * (outer_radius / (n - 1))
    nodes[-1] = outer_radius
    nodes.setflags(write=False)
    return RadialGrid(dim=int(dim), outer_radius=float(outer_radius), nodes=nodes, n=n)


@dataclass(frozen=True, eq=False)
class RadialField:
    """Samples of a radial function on ``grid``."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise DomainError(
                f"field has shape {values.shape}, grid has {self.grid.n} nodes"
            )
        object.__setattr__(self, "values", values)

    @property
    def r(self):
        return self.grid.nodes

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def __len__(self):
        return self.grid.n


def _samples(grid, f):
    values = f.values if isinstance(f, RadialField) else np.asarray(f, dtype=float)
    if values.shape != (grid.n,):
        raise DomainError(f"{values.shape[0] if values.ndim else 0} samples for {grid.n} nodes")
    return values


def simpson_weights(grid):
    """Simpson weights including the ball measure ``N omega_N r**(N-1)``."""
    geom = ball_geometry(grid.dim)
    w = np.full(grid.n, 2.0)
    w[1:-1:2] = 4.0
    w[0] = w[-1] = 1.0
    w *= grid.h / 3.0
    return w * geom.surface * grid.nodes ** (grid.dim - 1)


def ball_integral(grid, f):
    """Composite Simpson value of the integral of a radial ``f`` over the ball."""
    return float(simpson_weights(grid) @ _samples(grid, f))


def hermite_second_derivative(values, slopes, h):
    """Fourth-order ``u''`` at interior nodes of a uniform grid from values and slopes.

    ``2 (u[i+1] - 2u[i] + u[i-1]) / h**2 - (u'[i+1] - u'[i-1]) / (2h)``.
    """
    u = np.asarray(values, dtype=float)
    du = np.asarray(slopes, dtype=float)
    return 2.0 * (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2 - (du[2:] - du[:-2]) / (2.0 * h)


def _midpoints(grid):
    mid = np.empty(grid.n + 1)
    mid[0] = 0.0
    mid[1:-1] = 0.5 * (grid.nodes[1:] + grid.nodes[:-1])
    mid[-1] = grid.outer_radius
    return mid


def cell_volumes(grid):
    """Volumes of the finite-volume shells; they sum to ``omega_N R**N``."""
    omega = ball_geometry(grid.dim).omega_N
    mid = _midpoints(grid)
    return omega * np.diff(mid**grid.dim)


def face_conductances(grid):
    """``N omega_N r_{i+1/2}**(N-1) / h`` for the ``n-1`` interior faces."""
    geom = ball_geometry(grid.dim)
    mid = _midpoints(grid)[1:-1]
    return geom.surface * mid ** (grid.dim - 1) / grid.h


def stiffness(grid, ell=0):
    """Finite-volume stiffness of ``-Laplace`` on angular mode ``ell``.

    Returns ``(lower, diag, upper)`` for all ``n`` nodes; callers drop the
    Dirichlet node themselves.  For ``ell >= 1`` the centrifugal term
    ``ell(ell+N-2)/r**2`` is lumped into the diagonal and row 0 is
    meaningless, because those modes vanish at the origin.
    """
    c = face_conductances(grid)
    diag = np.zeros(grid.n)
    diag[:-1] += c
    diag[1:] += c
    if ell:
        vol = cell_volumes(grid)
        r = grid.nodes
        diag[1:] += vol[1:] * ell * (ell + grid.dim - 2) / r[1:] ** 2
    return -c, diag, -c.copy()


class TridiagonalLU:
    """LU factorization with partial pivoting of a tridiagonal matrix.

    With ``check=True`` a pivot smaller than ``1e-14`` times its row scale
    raises :class:`SingularSystemError`.  Inverse iteration sets
    ``check=False`` because it factors a nearly singular shift on purpose.
    """

    def __init__(self, lower, diag, upper, check=True):
        self.lower = np.ascontiguousarray(lower, dtype=float)
        self.diag = np.ascontiguousarray(diag, dtype=float)
        self.upper = np.ascontiguousarray(upper, dtype=float)
        n = self.diag.size
        if self.lower.size != n - 1 or self.upper.size != n - 1:
            raise DomainError("off-diagonals must have length n-1")
        if n <= 2:
            # the LAPACK wrapper rejects n = 2; solve such systems densely
            self._dense = np.diag(self.diag) + np.diag(self.lower, -1) + np.diag(self.upper, 1)
            scale = np.abs(self._dense).sum(axis=1).max()
            if check and abs(np.linalg.det(self._dense)) <= PIVOT_RTOL * scale**n:
                raise SingularSystemError(f"singular {n}x{n} system")
            return
        self._dense = None
        dl, d, du, du2, ipiv, info = lapack.dgttrf(self.lower, self.diag, self.upper)
        if info > 0 and check:
            raise SingularSystemError(f"exactly zero pivot at row {info - 1}")
        if check:
            scale = np.abs(self.diag).copy()
            scale[1:] = np.maximum(scale[1:], np.abs(self.lower))
            scale[:-1] = np.maximum(scale[:-1], np.abs(self.upper))
            bad = np.abs(d) < PIVOT_RTOL * scale
            if bad.any():
                i = int(np.argmax(bad))
                raise SingularSystemError(
                    f"pivot {d[i]:.3e} below tolerance at row {i} (row scale {scale[i]:.3e})"
                )
        self._factors = (dl, d, du, du2, ipiv)

    @property
    def n(self):
        return self.diag.size

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        y = self.diag[:, None] * x if x.ndim == 2 else self.diag * x
        if x.ndim == 2:
            y[1:] += self.lower[:, None] * x[:-1]
            y[:-1] += self.upper[:, None] * x[1:]
        else:
            y[1:] += self.lower * x[:-1]
            y[:-1] += self.upper * x[1:]
        return y

    def _raw_solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if self._dense is not None:
            return np.linalg.solve(self._dense, rhs)
        b = rhs.reshape(self.n, -1)
        x, info = lapack.dgttrs(*self._factors, b)
        if info != 0:
            raise SingularSystemError(f"dgttrs failed with info={info}")
        return x.reshape(rhs.shape)

    def solve(self, rhs, refine=1):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise DomainError(f"rhs length {rhs.shape[0]} for system of size {self.n}")
        x = self._raw_solve(rhs)
        for _ in range(refine):
            x = x + self._raw_solve(rhs - self.matvec(x))
        return x


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve the tridiagonal system with sub-, main and super-diagonals given."""
    return TridiagonalLU(lower, diag, upper).solve(rhs)


def solve_bordered(lu, col, row, corner, rhs, rhs_border, refine=1):
    """Solve ``[[A, col], [row^T, corner]] [x; y] = [rhs; rhs_border]``.

    ``lu`` is a :class:`TridiagonalLU` of ``A``.  The tridiagonal block is
    eliminated first, then the scalar Schur complement is solved.
    """
    col = np.asarray(col, dtype=float)
    row = np.asarray(row, dtype=float)
    z = lu.solve(np.column_stack([rhs, col]), refine=refine)
    z_rhs, z_col = z[:, 0], z[:, 1]
    schur = corner - row @ z_col
    scale = abs(corner) + np.abs(row) @ np.abs(z_col)
    if not np.isfinite(schur) or abs(schur) <= PIVOT_RTOL * scale:
        raise SingularSystemError(f"bordered Schur complement {schur:.3e} is singular")
    y = (rhs_border - row @ z_rhs) / schur
    x = z_rhs - y * z_col
    for _ in range(refine):
        r1 = rhs - lu.matvec(x) - col * y
        r2 = rhs_border - row @ x - corner * y
        zr = lu.solve(r1, refine=0)
        dy = (r2 - row @ zr) / schur
        x = x + zr - dy * z_col
        y = y + dy
    return x, y


def find_root_bracketed(f, lo, hi, tol, fprime=None, maxiter=400):
    """Root of ``f`` in ``[lo, hi]`` by safeguarded bisection.

    When ``fprime`` is given, a Newton step from the better endpoint is taken
    whenever it stays inside the current bracket and shrinks it fast enough.
    The result lies in a bracket of width at most ``tol``, or is an exact zero.
    """
    lo, hi = float(lo), float(hi)
    if lo > hi:
        lo, hi = hi, lo
    flo, fhi = f(lo), f(hi)
    for x, fx in ((lo, flo), (hi, fhi)):
        if not math.isfinite(fx):
            raise BracketError(f"non-finite value f({x!r}) = {fx!r}")
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo!r}, {hi!r}]: f = {flo!r}, {fhi!r}")
    x = 0.5 * (lo + hi)
    for _ in range(maxiter):
        if hi - lo <= tol:
            break
        step_ok = False
        if fprime is not None:
            xb, fb = (lo, flo) if abs(flo) < abs(fhi) else (hi, fhi)
            d = fprime(xb)
            if d and math.isfinite(d):
                xn = xb - fb / d
                if lo < xn < hi:
                    x, step_ok = xn, True
        if not step_ok:
            x = 0.5 * (lo + hi)
        fx = f(x)
        if not math.isfinite(fx):
            raise BracketError(f"non-finite value f({x!r}) = {fx!r}")
        if fx == 0.0:
            return x
        if (fx > 0) == (flo > 0):
            lo, flo = x, fx
        else:
            hi, fhi = x, fx
        if step_ok and hi - lo > tol:
            # probe just across the Newton iterate to close the bracket
            y = x + 0.5 * tol if x == lo else x - 0.5 * tol
            y = min(max(y, lo), hi)
            fy = f(y)
            if not math.isfinite(fy):
                raise BracketError(f"non-finite value f({y!r}) = {fy!r}")
            if fy == 0.0:
                return y
            if (fy > 0) == (flo > 0):
                lo, flo = y, fy
            else:
                hi, fhi = y, fy
    return lo if abs(flo) <= abs(fhi) else hi
