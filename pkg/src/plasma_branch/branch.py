"""Closed-form solution branch of the constrained plasma problem on the ball.

On the unit-volume ball every solution of

    -Laplace psi = [alpha + lam psi]_+**p,   int [alpha + lam psi]_+**p = 1,
    psi = 0 on the boundary,

is a rescaled Lane-Emden profile.  With ``a = 2/(p-1)`` and
``v = lam**(1/(p-1)) (alpha + lam psi)`` one has ``v(x) = R**-a u0(x/R)``
inside ``B_R``.  The scaling radius ``R`` is fixed by the mass constraint
``I(R) = lam**(p/(p-1))``, where

    I(R) = R**-kappa * Ip(min(R_N/R, 1)),    kappa = a + 2 - N > 0.

For ``R >= R_N`` the plasma fills the ball and ``alpha > 0``.  For ``R < R_N``
it occupies ``B_R`` only, ``v`` is harmonic in the annulus ``R < r < R_N``
and ``alpha < 0``.  The threshold ``R(lam_plus) = R_N`` gives

    lam_plus = (Ip(1) * R_N**-kappa)**((p-1)/p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BracketError, DomainError
from .lane_emden import Ip_of, Jp1_of, eval_u0
from .radial import RadialField, RadialGrid, find_root_bracketed

__all__ = [
    "BranchPoint",
    "RadialField",
    "POSITIVE",
    "THRESHOLD",
    "FREE_BOUNDARY",
    "decay_exponent",
    "script_I",
    "script_I_prime",
    "script_I_second",
    "R_of_lambda",
    "lambda_plus",
    "lambda_plus_planar",
    "regime_of",
    "gamma_alpha_mu",
    "alpha_free_boundary_closed_form",
    "branch_point",
    "reconstruct_psi",
    "energy_of",
    "energy_integrals",
    "bending_g",
    "lambda_turn",
]

POSITIVE = "positive"
THRESHOLD = "threshold"
FREE_BOUNDARY = "free_boundary"
THRESHOLD_RTOL = 1e-12


@dataclass(frozen=True)
class BranchPoint:
    """One point of the branch.

    ``mu`` is ``None`` in the free-boundary regime where ``alpha < 0``.  At
    ``lam = 0`` the scaling radius is infinite and ``r_lambda`` is 0.
    """

    lam: float
    R_of_lambda: float
    r_lambda: float
    gamma: float
    alpha: float
    mu: float | None
    energy: float
    regime: str


def _check_table(table, geom):
    if table.dim != geom.dim:
        raise DomainError(f"table is for N={table.dim}, geometry for N={geom.dim}")
    geom.check_branch_exponent(table.exponent)


def decay_exponent(dim, p):
    """``kappa = 2/(p-1) + 2 - N``, the decay rate of the constraint map."""
    return 2.0 / (p - 1.0) + 2.0 - dim


def _scale_exponent(p):
    return 2.0 / (p - 1.0)


def script_I(table, geom, R):
    """Mass of ``[v]_+**p`` over the ball as a function of the scaling radius."""
    if not R > 0:
        raise DomainError(f"scaling radius must be positive, got {R!r}")
    kappa = decay_exponent(geom.dim, table.exponent)
    if R < geom.R_N:
        return R**-kappa * table.Ip_total
    return R**-kappa * Ip_of(table, geom.R_N / R)


def script_I_prime(table, geom, R):
    """Analytic first derivative of :func:`script_I`."""
    if not R > 0:
        raise DomainError(f"scaling radius must be positive, got {R!r}")
    N, p = geom.dim, table.exponent
    kappa = decay_exponent(N, p)
    if R < geom.R_N:
        return -kappa * R ** (-kappa - 1.0) * table.Ip_total
    s = geom.R_N / R
    u, _ = eval_u0(table, s)
    boundary = geom.surface * geom.R_N**N * R ** (-_scale_exponent(p) - 3.0) * max(u, 0.0) ** p
    return -kappa * R ** (-kappa - 1.0) * Ip_of(table, s) - boundary


def script_I_second(table, geom, R):
    """Analytic second derivative of :func:`script_I`."""
    if not R > 0:
        raise DomainError(f"scaling radius must be positive, got {R!r}")
    N, p = geom.dim, table.exponent
    kappa = decay_exponent(N, p)
    if R < geom.R_N:
        return kappa * (kappa + 1.0) * R ** (-kappa - 2.0) * table.Ip_total
    s = geom.R_N / R
    u, du = eval_u0(table, s)
    u = max(u, 0.0)
    S = geom.surface
    # d/ds Ip(s) and d2/ds2 Ip(s)
    d1 = S * s ** (N - 1) * u**p
    d2 = S * ((N - 1) * s ** (N - 2) * u**p + p * s ** (N - 1) * u ** (p - 1) * du)
    ds = -geom.R_N / R**2
    d2s = 2.0 * geom.R_N / R**3
    Ip = Ip_of(table, s)
    return (
        kappa * (kappa + 1.0) * R ** (-kappa - 2.0) * Ip
        - 2.0 * kappa * R ** (-kappa - 1.0) * d1 * ds
        + R**-kappa * (d2 * ds**2 + d1 * d2s)
    )


def lambda_plus(table, geom):
    """Positivity threshold ``Ip**(1-1/p) R_N**(-(N/p)(1-p/p_N))``."""
    _check_table(table, geom)
    N, p = geom.dim, table.exponent
    shape = 1.0 if N == 2 else 1.0 - p * (N - 2) / N
    return table.Ip_total ** (1.0 - 1.0 / p) * geom.R_N ** (-(N / p) * shape)


def lambda_plus_planar(table):
    """Planar specialization ``pi**(1/p) Ip**((p-1)/p)``."""
    if table.dim != 2:
        raise DomainError("planar formula needs N = 2")
    p = table.exponent
    return math.pi ** (1.0 / p) * table.Ip_total ** ((p - 1.0) / p)


def R_of_lambda(table, geom, lam):
    """Inverse of the constraint map at ``lam**(p/(p-1))``.

    The root is bracketed in ``log R`` by geometric growth away from ``R_N``
    and polished with Newton steps from :func:`script_I_prime`.
    """
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam!r}")
    p = table.exponent
    log_target = (p / (p - 1.0)) * math.log(lam)

    def f(x):
        return math.log(script_I(table, geom, math.exp(x))) - log_target

    def fprime(x):
        R = math.exp(x)
        return R * script_I_prime(table, geom, R) / script_I(table, geom, R)

    x0 = math.log(geom.R_N)
    f0 = f(x0)
    if f0 == 0.0:
        return geom.R_N
    step = 1.0
    direction = 1.0 if f0 > 0 else -1.0
    x1 = x0 + direction * step
    for _ in range(200):
        if (f(x1) > 0) != (f0 > 0):
            break
        step *= 2.0
        x1 = x0 + direction * step
    else:
        raise BracketError(f"no bracket for R(lambda) at lambda={lam!r}")
    lo, hi = sorted((x0, x1))
    x = find_root_bracketed(f, lo, hi, tol=1e-15, fprime=fprime)
    return math.exp(x)


def regime_of(lam, lam_plus):
    if abs(lam - lam_plus) <= THRESHOLD_RTOL * lam_plus:
        return THRESHOLD
    return POSITIVE if lam < lam_plus else FREE_BOUNDARY


def _free_boundary_coefficient(table, geom, R):
    # v = A log(r/R) in the plane, A (r**(2-N) - R**(2-N)) otherwise
    N, a = geom.dim, _scale_exponent(table.exponent)
    if N == 2:
        return table.du0_at_1 / R**a
    return -table.du0_at_1 / (N - 2) * R ** -(a - N + 2)


def _gamma_scaled(table, geom, lam, R, regime):
    """``(gamma, (lam R^2)**(-1/(p-1)) * u0(r_lam))`` style pair.

    Returns ``gamma`` together with ``alpha`` computed without forming the
    separately over- and underflowing factors ``R**-a`` and ``lam**(-1/(p-1))``.
    """
    N, p = geom.dim, table.exponent
    a = _scale_exponent(p)
    if regime != FREE_BOUNDARY:
        u, _ = eval_u0(table, min(geom.R_N / R, 1.0))
        gamma = R**-a * u
        alpha = (lam * R * R) ** (-1.0 / (p - 1.0)) * u
        return gamma, alpha
    if N == 2:
        shape = math.log(geom.R_N / R)
    else:
        shape = (1.0 - (R / geom.R_N) ** (N - 2)) / (N - 2)
    gamma = table.du0_at_1 * R**-a * shape
    alpha = (lam * R * R) ** (-1.0 / (p - 1.0)) * table.du0_at_1 * shape
    return gamma, alpha


def gamma_alpha_mu(table, geom, lam):
    """Boundary value ``gamma``, multiplier ``alpha`` and ``mu = lam alpha**(p-1)``.

    ``mu`` is ``None`` when ``alpha < 0``.
    """
    _check_table(table, geom)
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam!r}")
    regime = regime_of(lam, lambda_plus(table, geom))
    R = R_of_lambda(table, geom, lam)
    gamma, alpha = _gamma_scaled(table, geom, lam, R, regime)
    if regime == THRESHOLD:
        alpha = max(alpha, 0.0)
    mu = lam * alpha ** (table.exponent - 1.0) if alpha >= 0 else None
    return gamma, alpha, mu


def alpha_free_boundary_closed_form(table, geom, lam):
    """Explicit ``alpha`` for ``lam > lam_plus`` with no root solve.

    Plane:  ``(p-1)/2 u0'(1) (lam/Ip) log(R_2**(2/(p-1)) lam**(p/(p-1)) / Ip)``.
    ``N >= 3``: ``-u0'(1)/(N-2) (lam/Ip) (R_N**(2-N) - (lam**p / Ip**(p-1))**(1/(p_N-p)))``.
    """
    _check_table(table, geom)
    if not lam > lambda_plus(table, geom):
        raise DomainError(f"closed form needs lambda > lambda_plus, got {lam!r}")
    N, p = geom.dim, table.exponent
    Ip, du1 = table.Ip_total, table.du0_at_1
    if N == 2:
        arg = geom.R_N ** (2.0 / (p - 1.0)) * lam ** (p / (p - 1.0)) / Ip
        return 0.5 * (p - 1.0) * du1 * (lam / Ip) * math.log(arg)
    pN = geom.p_critical
    inner = (lam**p / Ip ** (p - 1.0)) ** (1.0 / (pN - p))
    return -du1 / (N - 2) * (lam / Ip) * (geom.R_N ** (2 - N) - inner)


def _energy_closed_form(table, geom, lam, R, alpha):
    # E = (1/(2 lam)) (int [alpha + lam psi]_+^(p+1) - alpha); the integral of
    # v^(p+1) over the ball is R^(N - a(p+1)) J_{p+1}(min(R_N/R, 1))
    N, p = geom.dim, table.exponent
    a = _scale_exponent(p)
    s = min(geom.R_N / R, 1.0)
    J = Jp1_of(table, s)
    # lam^(-(p+1)/(p-1)) R^(N - a(p+1)) = (lam R^2)^(-(p+1)/(p-1)) R^N
    scaled = (lam * R * R) ** (-(p + 1.0) / (p - 1.0)) * R**N * J
    return (scaled - alpha) / (2.0 * lam)


# Below SMALL_LAMBDA * lambda_plus the difference above loses about
# eps / lam digits, so E is taken from a cubic through E(0) and three
# well-conditioned closed-form samples.  Interpolation error is of order
# SMALL_LAMBDA**4 relative.
SMALL_LAMBDA = 2e-3


def _energy_small_lambda(table, geom, lam, lp):
    step = SMALL_LAMBDA * lp
    xs = [0.0, step, 2 * step, 3 * step]
    ys = [geom.torsion_energy]
    for x in xs[1:]:
        R = R_of_lambda(table, geom, x)
        _, a = _gamma_scaled(table, geom, x, R, POSITIVE)
        ys.append(_energy_closed_form(table, geom, x, R, a))
    total = 0.0
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        w = 1.0
        for j, xj in enumerate(xs):
            if j != i:
                w *= (lam - xj) / (xi - xj)
        total += w * yi
    return total


def branch_point(table, geom, lam):
    """Assemble the :class:`BranchPoint` at ``lam >= 0``."""
    _check_table(table, geom)
    if not lam >= 0:
        raise DomainError(f"lambda must be non-negative, got {lam!r}")
    if lam == 0:
        return BranchPoint(
            lam=0.0,
            R_of_lambda=math.inf,
            r_lambda=0.0,
            gamma=0.0,
            alpha=1.0,
            mu=0.0,
            energy=geom.torsion_energy,
            regime=POSITIVE,
        )
    lp = lambda_plus(table, geom)
    regime = regime_of(lam, lp)
    R = R_of_lambda(table, geom, lam)
    gamma, alpha = _gamma_scaled(table, geom, lam, R, regime)
    if regime == THRESHOLD:
        alpha = max(alpha, 0.0)
    mu = lam * alpha ** (table.exponent - 1.0) if alpha >= 0 else None
    return BranchPoint(
        lam=float(lam),
        R_of_lambda=R,
        r_lambda=geom.R_N / R,
        gamma=gamma,
        alpha=alpha,
        mu=mu,
        energy=(
            _energy_small_lambda(table, geom, lam, lp)
            if lam < SMALL_LAMBDA * lp
            else _energy_closed_form(table, geom, lam, R, alpha)
        ),
        regime=regime,
    )


def reconstruct_psi(table, geom, lam, grid, return_slope=False):
    """``(alpha, psi)`` on ``grid`` from the scaling solution.

    ``psi = (lam**(-1/(p-1)) v - alpha) / lam``.  With ``return_slope`` the
    radial derivative ``psi'`` is returned as a third element.
    """
    _check_table(table, geom)
    if not isinstance(grid, RadialGrid) or grid.dim != geom.dim:
        raise DomainError("grid must be a radial grid of the same dimension")
    if abs(grid.outer_radius - geom.R_N) > 1e-14 * geom.R_N:
        raise DomainError("grid must span [0, R_N]")
    if not lam >= 0:
        raise DomainError(f"lambda must be non-negative, got {lam!r}")
    N, p = geom.dim, table.exponent
    r = grid.nodes
    if lam == 0:
        psi = (geom.R_N**2 - r**2) / (2 * N)
        out = (1.0, RadialField(grid, psi))
        return out + (RadialField(grid, -r / N),) if return_slope else out

    lp = lambda_plus(table, geom)
    regime = regime_of(lam, lp)
    R = R_of_lambda(table, geom, lam)
    _, alpha = _gamma_scaled(table, geom, lam, R, regime)
    if regime == THRESHOLD:
        alpha = max(alpha, 0.0)
    # w = lam^(-1/(p-1)) v = alpha + lam psi
    c = (lam * R * R) ** (-1.0 / (p - 1.0))
    w = np.empty_like(r)
    dw = np.empty_like(r)
    inside = r <= R
    u, du = eval_u0(table, np.minimum(r[inside] / R, 1.0))
    w[inside] = c * u
    dw[inside] = c * du / R
    if not inside.all():
        A = _free_boundary_coefficient(table, geom, R) * lam ** (-1.0 / (p - 1.0))
        ro = r[~inside]
        if N == 2:
            w[~inside] = A * np.log(ro / R)
            dw[~inside] = A / ro
        else:
            w[~inside] = A * (ro ** (2 - N) - R ** (2 - N))
            dw[~inside] = A * (2 - N) * ro ** (1 - N)
    psi = (w - alpha) / lam
    psi[-1] = 0.0
    out = (alpha, RadialField(grid, psi))
    if return_slope:
        out = out + (RadialField(grid, dw / lam),)
    return out


def energy_of(table, geom, lam):
    """Energy ``E = (1/2) int rho psi`` on the branch.

    Uses ``int rho psi = (int [alpha + lam psi]_+**(p+1) - alpha) / lam`` and
    the stored integral of ``u0**(p+1)``, so no field is sampled.
    """
    return branch_point(table, geom, lam).energy


def energy_integrals(table, geom, lam, grid):
    """``(1/2 int |grad psi|^2, 1/2 int rho psi)`` by Simpson on ``grid``."""
    from .radial import ball_integral

    alpha, psi, dpsi = reconstruct_psi(table, geom, lam, grid, return_slope=True)
    rho = np.maximum(alpha + lam * psi.values, 0.0) ** table.exponent
    grad = 0.5 * ball_integral(grid, dpsi.values**2)
    mixed = 0.5 * ball_integral(grid, rho * psi.values)
    return grad, mixed


def bending_g(table, geom, lam):
    """``2/(p-1) u0(r) + r u0'(r)`` at ``r = R_N / R(lam)``.

    ``mu`` increases in ``lam`` exactly where this is positive.
    """
    lp = lambda_plus(table, geom)
    if not (lam > 0 and lam <= lp * (1.0 + THRESHOLD_RTOL)):
        raise DomainError(f"lambda={lam!r} outside (0, lambda_plus={lp!r}]")
    r = min(geom.R_N / R_of_lambda(table, geom, lam), 1.0)
    u, du = eval_u0(table, r)
    return _scale_exponent(table.exponent) * u + r * du


def lambda_turn(table, geom, tol=1e-12):
    """Unique zero of :func:`bending_g` in ``(0, lam_plus)``."""
    lp = lambda_plus(table, geom)
    lo = 1e-6 * lp
    if not bending_g(table, geom, lo) > 0 or not bending_g(table, geom, lp) < 0:
        raise BracketError("bending function has no sign change on (0, lambda_plus)")
    return find_root_bracketed(lambda x: bending_g(table, geom, x), lo, lp, tol * lp)
