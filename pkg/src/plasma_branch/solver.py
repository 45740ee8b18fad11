"""Bordered Newton solver for the constrained plasma problem on the ball.

The unknowns are the interior nodal values of ``psi`` and the scalar
``alpha``.  Discretization is the finite-volume operator of
:mod:`plasma_branch.radial`.  Node ``i`` carries the equation

    (K psi)_i = vol_i * [alpha + lam psi_i]_+**p,

and the mass constraint is ``sum_i vol_i [alpha + lam psi_i]_+**p = 1``,
summed over all nodes including the boundary one, where ``psi = 0``.
The Jacobian is tridiagonal with one border row and column.  Each Newton
step eliminates the tridiagonal block first, then the scalar border.

Because ``K`` is symmetric and the volumes are exact, the discrete
counterparts of the Green identities used below hold to round-off:

* ``psi^T K psi == sum vol rho psi``, the two energy forms;
* ``d alpha/d lam == -<w>``;
* ``dE/d lam == sum vol rho eta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConvergenceError, DomainError, SingularSystemError
from .radial import (
    RadialField,
    RadialGrid,
    TridiagonalLU,
    cell_volumes,
    solve_bordered,
    stiffness,
)

__all__ = [
    "DEFAULT_GRID_N",
    "SolverSolution",
    "DerivativeFields",
    "Discretization",
    "discretization",
    "solve_plasma",
    "continue_branch",
    "solve_sweep",
    "derivative_fields",
    "entropy_identity_defect",
    "mean_value_defect",
    "weighted_mean",
    "project_mean",
    "free_boundary_radius",
]

# Second-order grid error in alpha is about 4 h**2 in absolute terms near
# lambda_+, so reaching 5e-6 relative there needs h of order 1e-4.
DEFAULT_GRID_N = 8193
MAX_NEWTON = 50
RESIDUAL_RTOL = 1e-10
CONSTRAINT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Discretization:
    """Volumes and interior stiffness for one grid."""

    grid: RadialGrid
    vol: np.ndarray
    cond: np.ndarray
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def n_inner(self):
        return self.grid.n - 1

    def apply_stiffness(self, psi_inner):
        # flux form: differences first keeps round-off proportional to the
        # jumps of psi rather than to psi itself
        flux = self.cond * np.diff(np.append(psi_inner, 0.0))
        y = -flux
        y[1:] += flux[:-1]
        return y

    def laplacian(self, values):
        """``-Laplace`` of a Dirichlet field at the interior nodes."""
        return self.apply_stiffness(np.asarray(values)[:-1]) / self.vol[:-1]


def discretization(grid):
    lo, d, up = stiffness(grid)
    n1 = grid.n - 1
    return Discretization(
        grid=grid,
        vol=cell_volumes(grid),
        cond=-lo,
        lower=lo[: n1 - 1].copy(),
        diag=d[:n1].copy(),
        upper=up[: n1 - 1].copy(),
    )


@dataclass(frozen=True, eq=False)
class SolverSolution:
    """A converged slice ``(alpha, psi)`` at load ``lam``."""

    lam: float
    alpha: float
    psi: RadialField
    residual_pde: float
    constraint_defect: float
    newton_iters: int
    p: float

    @property
    def grid(self):
        return self.psi.grid

    @cached_property
    def disc(self):
        return discretization(self.grid)

    @property
    def plasma(self):
        """``alpha + lam psi`` at every node."""
        return self.alpha + self.lam * self.psi.values

    @property
    def rho(self):
        return np.maximum(self.plasma, 0.0) ** self.p

    @property
    def weight(self):
        """``rho**(1/q) = [alpha + lam psi]_+**(p-1)``."""
        return np.maximum(self.plasma, 0.0) ** (self.p - 1.0)

    @property
    def m(self):
        return float(self.disc.vol @ self.weight)

    @property
    def mass(self):
        return float(self.disc.vol @ self.rho)

    @property
    def energy(self):
        """``(1/2) sum vol rho psi``."""
        return 0.5 * float(self.disc.vol @ (self.rho * self.psi.values))

    @property
    def energy_gradient_form(self):
        """``(1/2) psi^T K psi``, the discrete Dirichlet energy."""
        psi = self.psi.values[:-1]
        return 0.5 * float(psi @ self.disc.apply_stiffness(psi))


@dataclass(frozen=True, eq=False)
class DerivativeFields:
    """Derivatives along the branch at one slice.

    ``eta`` solves the linearized problem for ``d psi/d lam`` and ``w`` the one
    for ``d(lam psi)/d lam``.  ``dalpha`` and ``dE`` come from the Newton
    tangent, which is independent of those two solves.
    """

    eta: RadialField
    w: RadialField
    dalpha: float
    dE: float
    m_lambda: float
    mean_w: float
    rho_eta: float = field(default=math.nan)


def weighted_mean(sol, values):
    """``<phi> = sum vol rho^(1/q) phi / m``."""
    g = sol.disc.vol * sol.weight
    return float(g @ np.asarray(values)) / float(g.sum())


def project_mean(sol, values):
    """``[phi] = phi - <phi>``."""
    values = np.asarray(values, dtype=float)
    return values - weighted_mean(sol, values)


def _check(geom, p, lam, grid):
    geom.check_branch_exponent(p)
    if not lam >= 0 or not math.isfinite(lam):
        raise DomainError(f"lambda must be a finite non-negative number, got {lam!r}")
    if grid.dim != geom.dim or abs(grid.outer_radius - geom.R_N) > 1e-14 * geom.R_N:
        raise DomainError("grid must span [0, R_N] in the geometry's dimension")


def _values_from_jumps(jumps):
    # psi_i = sum_{j >= i} (psi_j - psi_{j+1}), with psi = 0 on the boundary
    return np.append(np.cumsum(jumps[::-1])[::-1], 0.0)


def _residual(disc, p, lam, alpha, jumps):
    psi = _values_from_jumps(jumps)
    pos = np.maximum(alpha + lam * psi, 0.0)
    rho = pos**p
    flux = disc.cond * jumps
    F = flux - disc.vol[:-1] * rho[:-1]
    F[1:] -= flux[:-1]
    G = float(disc.vol @ rho) - 1.0
    return F, G, pos, psi


def _jacobian(disc, p, lam, pos):
    s = p * disc.vol * pos ** (p - 1.0)
    A_diag = disc.diag - lam * s[:-1]
    lu = TridiagonalLU(disc.lower, A_diag, disc.upper)
    col = -s[:-1]
    row = lam * s[:-1]
    corner = float(s.sum())
    return lu, col, row, corner


def _converged(disc, F, G, psi, strict=True):
    res = float(np.max(np.abs(F / disc.vol[:-1])))
    scale = 1.0 + float(np.max(np.abs(psi)))
    if strict:
        return res <= RESIDUAL_RTOL * scale and abs(G) <= CONSTRAINT_TOL
    return res <= 1e-9 * scale and abs(G) <= 1e-10


def solve_plasma(geom, p, lam, grid, init=None, max_iter=MAX_NEWTON):
    """Solve the discrete problem at ``lam`` by damped bordered Newton.

    ``init`` is an optional ``(alpha, psi)`` warm start; ``psi`` may be a
    :class:`RadialField` or an array of nodal values.

    The iterate is stored as the jumps ``psi_i - psi_{i+1}`` between
    neighbours.  Near the centre the equation divides those jumps by cell
    volumes of order ``h**N``.  Keeping the jumps exact there stops the
    rounding of ``psi`` itself from setting a residual floor.
    """
    _check(geom, p, lam, grid)
    disc = discretization(grid)
    r = grid.nodes
    if init is None:
        alpha = 1.0
        values = (geom.R_N**2 - r**2) / (2 * geom.dim)
    else:
        alpha = float(init[0])
        values = init[1].values if isinstance(init[1], RadialField) else np.asarray(init[1])
        values = np.array(values, dtype=float)
        values[-1] = 0.0
    jumps = -np.diff(values)

    F, G, pos, psi = _residual(disc, p, lam, alpha, jumps)
    merit = float(F @ F + G * G)
    it = 0
    while not _converged(disc, F, G, psi):
        it += 1
        if it > max_iter:
            raise ConvergenceError(
                f"Newton did not converge in {max_iter} iterations at lambda={lam!r}", lam=lam
            )
        try:
            lu, col, row, corner = _jacobian(disc, p, lam, pos)
            d_psi, d_alpha = solve_bordered(lu, col, row, corner, -F, -G)
        except SingularSystemError as exc:
            raise SingularSystemError(f"Newton Jacobian singular at lambda={lam!r}: {exc}") from exc
        d_jumps = -np.diff(np.append(d_psi, 0.0))
        t = 1.0
        for _ in range(40):
            trial = _residual(disc, p, lam, alpha + t * d_alpha, jumps + t * d_jumps)
            merit_try = float(trial[0] @ trial[0] + trial[1] ** 2)
            if merit_try <= (1.0 - 1e-4 * t) * merit or merit_try == 0.0:
                break
            t *= 0.5
        else:
            # no decrease even for tiny steps: round-off floor reached
            if _converged(disc, F, G, psi, strict=False):
                break
            raise ConvergenceError(f"line search failed at lambda={lam!r}", lam=lam)
        jumps = jumps + t * d_jumps
        alpha = alpha + t * d_alpha
        F, G, pos, psi = trial
        merit = merit_try
        small_step = (
            float(np.max(np.abs(t * d_psi))) <= 1e-13 * (1.0 + np.max(np.abs(psi)))
            and abs(t * d_alpha) <= 1e-13
        )
        if small_step and _converged(disc, F, G, psi, strict=False):
            break
    sol = SolverSolution(
        lam=float(lam),
        alpha=float(alpha),
        psi=RadialField(grid, psi),
        residual_pde=float(np.max(np.abs(F / disc.vol[:-1]))),
        constraint_defect=abs(G),
        newton_iters=it,
        p=float(p),
    )
    object.__setattr__(sol, "disc", disc)
    return sol


def solve_sweep(geom, p, lambdas, grid, max_step=None, max_halvings=12, first=None):
    """Warm-started solves at the increasing loads ``lambdas``.

    Intermediate loads are inserted so no continuation step exceeds
    ``max_step``; a failed step is retried with half the increment.  The
    initial guess at each step is the secant extrapolation of the last two
    converged slices.
    """
    lambdas = [float(x) for x in lambdas]
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise DomainError("loads must be strictly increasing")
    if max_step is not None and not max_step > 0:
        raise DomainError("max_step must be positive")
    out = []
    prev = first
    prev2 = None

    def guess(lam):
        if prev is None:
            return None
        if prev2 is None or prev.lam == prev2.lam:
            return prev.alpha, prev.psi.values
        t = (lam - prev.lam) / (prev.lam - prev2.lam)
        return (
            prev.alpha + t * (prev.alpha - prev2.alpha),
            prev.psi.values + t * (prev.psi.values - prev2.psi.values),
        )

    for target in lambdas:
        if prev is None:
            sol = solve_plasma(geom, p, target, grid)
            prev2, prev = prev, sol
            out.append(sol)
            continue
        current = prev.lam
        step = target - current
        if max_step is not None:
            step = min(step, max_step)
        halvings = 0
        while current < target:
            lam = min(current + step, target)
            if target - lam < 1e-12 * max(target, 1.0):
                lam = target
            try:
                sol = solve_plasma(geom, p, lam, grid, init=guess(lam))
            except (ConvergenceError, SingularSystemError) as exc:
                halvings += 1
                if halvings > max_halvings:
                    raise ConvergenceError(
                        f"continuation failed at lambda={lam!r}: {exc}", lam=lam
                    ) from exc
                step *= 0.5
                continue
            prev2, prev = prev, sol
            current = lam
        out.append(prev)
    return out


def continue_branch(geom, p, lambda_max, steps, grid, max_step=None):
    """Natural-parameter sweep over ``lam = 0, ..., lambda_max`` in ``steps`` steps."""
    if int(steps) != steps or steps < 1:
        raise DomainError("steps must be a positive integer")
    if not lambda_max > 0:
        raise DomainError("lambda_max must be positive")
    lambdas = np.linspace(0.0, lambda_max, int(steps) + 1)
    return solve_sweep(geom, p, lambdas, grid, max_step=max_step)


def derivative_fields(sol, p=None):
    """Solve for ``w`` and ``eta`` and return the branch derivatives.

    Valid for ``alpha > 0``.  The nonlocal projection is carried by an extra
    unknown ``t = <phi>`` bordering the tridiagonal block.
    """
    p = sol.p if p is None else float(p)
    if not sol.alpha > 0:
        raise DomainError("derivative fields need alpha > 0")
    disc = sol.disc
    grid = sol.grid
    lam = sol.lam
    tau = lam * p
    psi = sol.psi.values
    s = sol.weight
    g = disc.vol * s
    m = float(g.sum())
    rho = sol.rho

    A_diag = disc.diag - tau * g[:-1]
    lu = TridiagonalLU(disc.lower, A_diag, disc.upper)

    # Newton tangent: d/d lam of (K psi - vol rho, mass - 1) = 0
    ps = p * g
    col = -ps[:-1]
    row = lam * ps[:-1]
    corner = float(ps.sum())
    eta_t, dalpha = solve_bordered(
        lu, col, row, corner, ps[:-1] * psi[:-1], -float(ps @ psi)
    )

    def nonlocal_solve(rhs):
        x, t = solve_bordered(lu, tau * g[:-1], g[:-1], -m, rhs, 0.0)
        return np.append(x, 0.0), t

    w, mean_w = nonlocal_solve(disc.vol[:-1] * rho[:-1])
    psi_proj = psi - float(g @ psi) / m
    eta, _ = nonlocal_solve(p * g[:-1] * psi_proj[:-1])

    dE = float(disc.vol[:-1] * rho[:-1] @ eta_t)
    return DerivativeFields(
        eta=RadialField(grid, eta),
        w=RadialField(grid, w),
        dalpha=float(dalpha),
        dE=dE,
        m_lambda=m,
        mean_w=float(mean_w),
        rho_eta=float(disc.vol @ (rho * eta)),
    )


def entropy_identity_defect(sol, fields, p=None):
    """``|d alpha/d lam + 2E + (1 - 1/p) lam dE/d lam|``."""
    p = sol.p if p is None else float(p)
    if sol.lam <= 0:
        raise DomainError("the identity is stated for lambda > 0")
    lhs = fields.dalpha + 2.0 * sol.energy
    rhs = -(1.0 - 1.0 / p) * sol.lam * fields.dE
    return abs(lhs - rhs)


def mean_value_defect(sol):
    """``|alpha + <lam psi> - 1/m|``."""
    u = sol.lam * sol.psi.values
    return abs(sol.alpha + weighted_mean(sol, u) - 1.0 / sol.m)


def free_boundary_radius(sol):
    """Radius of the first node where ``alpha + lam psi <= 0``, or ``None``."""
    idx = np.flatnonzero(sol.plasma <= 0.0)
    if idx.size == 0:
        return None
    return float(sol.grid.nodes[idx[0]])
