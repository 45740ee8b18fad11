"""Weighted nonlocal eigenproblems, Sobolev constants and stability sweeps.

The linearization of the constrained problem at a slice with ``alpha > 0`` is

    -Laplace phi - tau s [phi] = sigma s [phi],    s = rho**(1/q),

with ``tau = lam p``.  Here ``[phi] = phi - <phi>`` and ``<.>`` is the
``s``-weighted mean.  On the ball the problem splits by angular mode ``ell``:

* For ``ell >= 1`` the weighted mean vanishes by symmetry.  Mode ``ell`` is
  then the plain weighted Sturm-Liouville problem
  ``K_ell phi = (tau + sigma) D phi``, where ``D = diag(vol s)``.
* For ``ell = 0`` the projection stays.  Write ``g = vol * s`` and
  ``m = sum g``, and let ``x(z)`` solve ``(K - z D) x = g``.  The projected
  eigenvalues ``z = tau + sigma`` are then the roots of

      f(z) = 1 + (z/m) g^T x(z).

  ``f`` rises from ``-inf`` to ``+inf`` between consecutive eigenvalues of
  the unprojected pencil ``(K, D)``.  So the ``j``-th projected eigenvalue
  is the single root between the ``j``-th and ``(j+1)``-th unprojected ones,
  and ``x(z)`` at that root is its eigenvector.  Everything costs O(n) per
  evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import DomainError, StabilityError
from .lane_emden import build_lane_emden
from .radial import RadialField, TridiagonalLU, find_root_bracketed, make_grid
from .solver import discretization, solve_plasma, solve_sweep

__all__ = [
    "SpectralReport",
    "SobolevConstants",
    "StabilityCertificate",
    "sobolev_Lambda",
    "sobolev_Lambda_oracle",
    "thresholds",
    "eigen_L",
    "eigen_residual",
    "weighted_normalization",
    "fourier_relation_defect",
    "energy_inequality_slack",
    "stability_certificate",
]

DEFAULT_MODES = 2
DEFAULT_RADIAL_MODES = 4
SOBOLEV_GRID_N = 8193


@dataclass(frozen=True, eq=False)
class SpectralReport:
    """Leading eigenvalues of the linearized operator at one slice.

    ``sigma[ell]`` lists the leading ``sigma`` of angular mode ``ell`` in
    increasing order.  ``eigenfunctions`` are the radial-mode
    eigenfunctions, normalized so that ``phi^T K phi = 1``.  ``mu`` holds the
    radial eigenvalues ``tau/(tau + sigma)`` of the compact operator.  ``mu1``
    is its largest eigenvalue, computed separately as a Rayleigh quotient of
    the minimizing mode.
    """

    lam: float
    tau: float
    sigma: dict
    sigma1: float
    sigma1_mode: int
    nu1: float
    mu1: float
    mu: np.ndarray
    eigenfunctions: tuple
    nu: np.ndarray
    m_lambda: float

    @property
    def radial_sigma(self):
        return self.sigma[0]


@dataclass(frozen=True)
class SobolevConstants:
    Lambda_2p: float
    Lambda_p1: float | None
    lambda0: float
    lambda1: float | None


@dataclass(frozen=True, eq=False)
class StabilityCertificate:
    lambdas: np.ndarray
    sigma1: np.ndarray
    lambda_plus: float

    @property
    def min_sigma1(self):
        return float(self.sigma1.min())

    @property
    def argmin_lambda(self):
        return float(self.lambdas[int(np.argmin(self.sigma1))])

    @property
    def passed(self):
        return bool(np.all(self.sigma1 > 0))


# -- Sobolev constants ---------------------------------------------------------


def _check_t(geom, t):
    N = geom.dim
    upper = math.inf if N == 2 else 2 * N / (N - 2)
    if not (t >= 2 and t < upper and math.isfinite(t)):
        raise DomainError(f"exponent t={t!r} outside [2, {upper}) for N={N}")


def _dirichlet_eigenvalue(geom, n):
    grid = make_grid(geom.dim, geom.R_N, n)
    disc = discretization(grid)
    vals, _ = _pencil_lowest(_radial_pencil(disc), disc.vol[:-1], 1)
    return float(vals[0])


def sobolev_Lambda(geom, t, n=SOBOLEV_GRID_N, table_n=2049):
    """Best constant of the embedding of H^1_0 into L^t on the unit-volume ball.

    ``t = 2`` gives the first Dirichlet eigenvalue, computed on a radial grid
    of ``n`` nodes.  For ``t > 2`` the extremal is a Lane-Emden profile with
    exponent ``t - 1`` rescaled to radius ``R_N``.  Then
    ``Lambda = (int u*^t)**((t-2)/t)`` because ``int |grad u*|^2 = int u*^t``.
    """
    _check_t(geom, t)
    if t == 2:
        return _dirichlet_eigenvalue(geom, n)
    table = build_lane_emden(geom.dim, t - 1.0, table_n)
    N = geom.dim
    # u*(x) = R_N^(-2/(t-2)) u0(x/R_N)
    integral = geom.R_N ** (N - 2.0 * t / (t - 2.0)) * table.Jp1_total
    return integral ** ((t - 2.0) / t)


def sobolev_Lambda_oracle(geom, t, n=2049, tol=1e-13, max_iter=20000):
    """Independent minimization of ``int |grad w|^2 / (int |w|^t)^(2/t)``.

    Runs the nonlinear power iteration ``w <- K^{-1}(vol w^(t-1))``,
    rescaled to unit Dirichlet energy, over positive radial grid functions.
    Each sweep is a projected gradient step of length one for the convex
    functional ``sum vol w^t`` on the energy sphere, so that functional
    never decreases.
    """
    _check_t(geom, t)
    grid = make_grid(geom.dim, geom.R_N, n)
    disc = discretization(grid)
    lu = TridiagonalLU(disc.lower, disc.diag, disc.upper)
    vol = disc.vol[:-1]
    w = (geom.R_N**2 - grid.nodes[:-1] ** 2).copy()
    w /= math.sqrt(w @ disc.apply_stiffness(w))
    value = vol @ w**t
    for _ in range(max_iter):
        w = lu.solve(vol * w ** (t - 1.0))
        w /= math.sqrt(w @ disc.apply_stiffness(w))
        new = vol @ w**t
        if abs(new - value) <= tol * new:
            value = new
            break
        value = new
    return float(value ** (-2.0 / t))


def thresholds(geom, p, table_n=2049):
    """``lambda0 = Lambda(2p)/p`` and, in the plane, ``lambda1``."""
    geom.check_branch_exponent(p)
    L2p = sobolev_Lambda(geom, 2.0 * p, table_n=table_n)
    if geom.dim != 2:
        return SobolevConstants(Lambda_2p=L2p, Lambda_p1=None, lambda0=L2p / p, lambda1=None)
    Lp1 = sobolev_Lambda(geom, p + 1.0, table_n=table_n)
    lam1 = (8 * math.pi / (p + 1.0)) ** ((p - 1.0) / (2 * p)) * Lp1 ** ((p + 1.0) / (2 * p))
    return SobolevConstants(Lambda_2p=L2p, Lambda_p1=Lp1, lambda0=L2p / p, lambda1=lam1)


# -- pencils -------------------------------------------------------------------


class _FluxPencil:
    """Symmetric tridiagonal ``K`` stored as couplings plus a diagonal remainder.

    ``x^T K x = sum c (x_i - x_{i+1})**2 + sum extra x**2``, which keeps
    quadratic forms accurate to round-off relative to their size.
    """

    def __init__(self, couplings, extra):
        self.c = np.asarray(couplings, dtype=float)
        self.extra = np.asarray(extra, dtype=float)
        self.diag = self.extra.copy()
        self.diag[:-1] += self.c
        self.diag[1:] += self.c
        self.off = -self.c

    def quad(self, x):
        return float(self.c @ np.diff(x) ** 2 + self.extra @ (x * x))

    def apply(self, x):
        flux = self.c * np.diff(x)
        y = self.extra * x
        y[:-1] -= flux
        y[1:] += flux
        return y

    def solve_shifted(self, shift_weight, rhs, sweeps=2):
        """Solve ``(K - diag(shift_weight)) x = rhs``.

        Refinement sweeps use the flux-form residual.  The LAPACK residual
        loses digits at the centre, where a row is nearly a pure difference.
        """
        lu = self.factor(shift_weight)
        x = lu.solve(rhs, refine=0)
        for _ in range(sweeps):
            r = rhs - (self.apply(x) - shift_weight * x)
            x = x + lu.solve(r, refine=0)
        return x

    def factor(self, shift_weight):
        return TridiagonalLU(self.off, self.diag - shift_weight, self.off, check=False)


def _radial_pencil(disc):
    extra = np.zeros(disc.n_inner)
    extra[-1] = disc.cond[-1]
    return _FluxPencil(disc.cond[:-1], extra)


def _angular_pencil(grid, disc, ell):
    r = grid.nodes[1:-1]
    extra = disc.vol[1:-1] * ell * (ell + grid.dim - 2) / r**2
    extra[0] += disc.cond[0]
    extra[-1] += disc.cond[-1]
    return _FluxPencil(disc.cond[1:-1], extra)


def _pencil_lowest(pencil, weight, k):
    """Lowest ``k`` eigenpairs of ``K x = z diag(weight) x``.

    A symmetric tridiagonal eigensolve of ``D^-1/2 K D^-1/2`` gives starting
    pairs.  One step of inverse iteration on the unscaled pencil then cleans
    each vector, and its Rayleigh quotient is taken as the eigenvalue.
    """
    sq = np.sqrt(weight)
    d = pencil.diag / weight
    e = pencil.off / (sq[:-1] * sq[1:])
    vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
    out_vals = np.empty(k)
    out_vecs = np.empty((weight.size, k))
    for j in range(k):
        x = vecs[:, j] / sq
        y = pencil.solve_shifted(vals[j] * (1.0 + 1e-13) * weight, weight * x, sweeps=0)
        if np.all(np.isfinite(y)):
            x = y
        x = x / math.sqrt(pencil.quad(x))
        if x[np.argmax(np.abs(x))] < 0:
            x = -x
        out_vals[j] = 1.0 / float(weight @ (x * x))
        out_vecs[:, j] = x
    return out_vals, out_vecs


def _projected_radial(pencil, g, m, poles, k):
    """Lowest ``k`` roots of the secular function between ``poles``."""
    gi = g[:-1]

    def solve(z):
        return pencil.solve_shifted(z * gi, gi)

    def secular(z):
        return 1.0 + (z / m) * float(gi @ solve(z))

    roots = np.empty(k)
    vecs = []
    for j in range(k):
        a, b = poles[j], poles[j + 1]
        gap = b - a
        eps = 1e-10
        while True:
            lo, hi = a + eps * gap, b - eps * gap
            flo, fhi = secular(lo), secular(hi)
            if flo < 0 < fhi:
                break
            eps *= 0.1
            if eps < 1e-16:
                raise DomainError("secular equation has no sign change between poles")
        z = find_root_bracketed(secular, lo, hi, tol=4e-16 * hi)
        roots[j] = z
        x = solve(z)
        x /= math.sqrt(pencil.quad(x))
        if x[0] < 0:
            x = -x
        vecs.append(x)
    return roots, vecs


def _projected_mass(g, m, x):
    # sum g [x]^2 with x = 0 on the boundary node
    mean = float(g[:-1] @ x) / m
    return float(g[:-1] @ (x - mean) ** 2) + g[-1] * mean**2


def eigen_L(geom, p, sol, modes=DEFAULT_MODES, radial_modes=DEFAULT_RADIAL_MODES):
    """Spectrum of the linearized operator at the slice ``sol``.

    ``modes`` is the largest angular mode considered.  ``radial_modes``
    eigenpairs are kept for ``ell = 0``.  At ``lam = 0`` the weight is one
    and ``tau = 0``, which the same code covers.
    """
    p = float(p)
    if not sol.alpha > 0:
        raise DomainError("spectral data need alpha > 0")
    if int(modes) != modes or modes < 0:
        raise DomainError("modes must be a non-negative integer")
    if sol.grid.dim != geom.dim:
        raise DomainError("solution and geometry dimensions differ")
    lam = sol.lam
    tau = lam * p
    disc = sol.disc
    s = sol.weight
    g = disc.vol * s
    m = float(g.sum())

    radial = _radial_pencil(disc)
    poles, _ = _pencil_lowest(radial, g[:-1], radial_modes + 1)
    nu = poles - tau
    z0, vecs0 = _projected_radial(radial, g, m, poles, radial_modes)
    sigma = {0: z0 - tau}

    mus = tau / z0
    vectors = {0: vecs0}

    grid = sol.grid
    for ell in range(1, int(modes) + 1):
        # unknowns at nodes 1..n-2: zero at the centre and the boundary
        vals, vecs = _pencil_lowest(_angular_pencil(grid, disc, ell), g[1:-1], 2)
        sigma[ell] = vals - tau
        vectors[ell] = [vecs[:, j] for j in range(vecs.shape[1])]

    best_mode = min(sigma, key=lambda ell: sigma[ell][0])
    sigma1 = float(sigma[best_mode][0])
    # mu_1 as a Rayleigh quotient of the compact operator, not from sigma_1
    x = vectors[best_mode][0]
    if best_mode == 0:
        mu1 = tau * _projected_mass(g, m, x)
    else:
        mu1 = tau * float(g[1:-1] @ (x * x))

    efuns = tuple(RadialField(grid, np.append(x, 0.0)) for x in vecs0)
    return SpectralReport(
        lam=lam,
        tau=tau,
        sigma=sigma,
        sigma1=sigma1,
        sigma1_mode=best_mode,
        nu1=float(nu[0]),
        mu1=float(mu1),
        mu=np.asarray(mus),
        eigenfunctions=efuns,
        nu=nu,
        m_lambda=m,
    )


def eigen_residual(report, sol, j=1):
    """``max |-Laplace phi_j - (tau + sigma_j) s [phi_j]| / max |phi_j|``.

    Taken over interior nodes of the ``j``-th radial eigenfunction.
    """
    phi = report.eigenfunctions[j - 1].values
    disc = sol.disc
    s = sol.weight
    g = disc.vol * s
    proj = phi - float(g @ phi) / float(g.sum())
    lhs = disc.laplacian(phi)
    rhs = (report.tau + report.sigma[0][j - 1]) * s[:-1] * proj[:-1]
    return float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(phi)))


def weighted_normalization(report, sol, j=1):
    """``(tau + sigma_j) int s [phi_j]^2``, which is one for a normalized mode."""
    g = sol.disc.vol * sol.weight
    x = report.eigenfunctions[j - 1].values[:-1]
    return (report.tau + float(report.sigma[0][j - 1])) * _projected_mass(g, float(g.sum()), x)


def _weighted_pair(sol, a, b):
    g = sol.disc.vol * sol.weight
    m = float(g.sum())
    pa = a - float(g @ a) / m
    pb = b - float(g @ b) / m
    return float(g @ (pa * pb))


def fourier_relation_defect(report, sol, fields, p, j):
    """``|sigma_j gamma_j - p beta_j|`` relative to ``|sigma_j gamma_j| + |p beta_j| + 1``.

    ``beta_j = (tau + sigma_j) int s [phi_j][psi]``, and ``gamma_j`` is the
    same with ``eta`` in place of ``psi``.
    """
    if int(j) != j or not 1 <= j <= len(report.eigenfunctions):
        raise DomainError(f"mode index j={j!r} out of range")
    sig = float(report.sigma[0][j - 1])
    phi = report.eigenfunctions[j - 1].values
    z = report.tau + sig
    beta = z * _weighted_pair(sol, phi, sol.psi.values)
    gamma = z * _weighted_pair(sol, phi, fields.eta.values)
    lhs, rhs = sig * gamma, float(p) * beta
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1.0)


def energy_inequality_slack(report, sol, fields, p):
    """``int s [eta][psi] - sigma_1 (m/p) <[eta]^2>``; non-negative on stable slices."""
    lhs = _weighted_pair(sol, fields.eta.values, sol.psi.values)
    rhs = report.sigma1 / float(p) * _weighted_pair(sol, fields.eta.values, fields.eta.values)
    return lhs - rhs


def stability_certificate(geom, p, lambda_samples, grid=None, lam_plus=None, modes=DEFAULT_MODES):
    """Check ``sigma_1 > 0`` on ``lambda_samples`` loads over ``[0, 0.995 lam_plus]``.

    Raises :class:`StabilityError` at the first non-positive value.
    """
    from .branch import lambda_plus
    from .solver import DEFAULT_GRID_N

    geom.check_branch_exponent(p)
    if int(lambda_samples) != lambda_samples or lambda_samples < 2:
        raise DomainError("need at least two samples")
    if lam_plus is None:
        lam_plus = lambda_plus(build_lane_emden(geom.dim, p), geom)
    if grid is None:
        grid = make_grid(geom.dim, geom.R_N, DEFAULT_GRID_N)
    lambdas = np.linspace(0.0, 0.995 * lam_plus, int(lambda_samples))
    sols = solve_sweep(geom, p, lambdas, grid, max_step=lam_plus / 100)
    sig = np.empty(lambdas.size)
    for i, sol in enumerate(sols):
        sig[i] = eigen_L(geom, p, sol, modes=modes, radial_modes=1).sigma1
        if not sig[i] > 0:
            raise StabilityError(
                f"sigma_1 = {sig[i]:.6g} <= 0 at lambda = {sol.lam!r}", lam=sol.lam, sigma1=sig[i]
            )
    return StabilityCertificate(lambdas=lambdas, sigma1=sig, lambda_plus=float(lam_plus))
