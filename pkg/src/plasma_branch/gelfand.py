"""Gelfand problem ``-Laplace v = mu (1 + v)**p`` from the plasma branch.

For ``0 < lam < lam_plus`` the field ``v = (lam/alpha) psi`` solves the
Gelfand problem with ``mu = lam alpha**(p-1)``.  Along the branch ``mu``
rises from zero, bends once at ``lambda_t`` and falls back to zero, while
the energy keeps increasing.  That is the bell curve emitted here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .branch import THRESHOLD_RTOL, branch_point, lambda_plus, lambda_turn, reconstruct_psi
from .errors import BendingPatternError, DomainError
from .lane_emden import DEFAULT_N
from .radial import RadialField, ball_integral, hermite_second_derivative, make_grid

__all__ = [
    "GelfandPoint",
    "BellCurve",
    "to_gelfand",
    "gelfand_vmax",
    "bell_curve",
    "MIN_BELL_SAMPLES",
]

MIN_BELL_SAMPLES = 100


@dataclass(frozen=True, eq=False)
class GelfandPoint:
    lam: float
    mu: float
    v: RadialField
    dv: RadialField
    E: float
    v_max: float
    alpha: float
    p: float

    def q_residual(self):
        """Largest nodal residual of ``-Laplace v - mu (1+v)^p``, scaled by ``(1+|v|_inf)^p``.

        ``v''`` is the Hermite difference of the sampled values and exact
        slopes.  At the centre, ``Laplace v = N v''(0)`` with ``v'(0) = 0``.
        """
        grid = self.v.grid
        h, N, r = grid.h, grid.dim, grid.nodes
        v, dv = self.v.values, self.dv.values
        lap = np.empty(grid.n - 1)
        lap[1:] = hermite_second_derivative(v, dv, h) + (N - 1) / r[1:-1] * dv[1:-1]
        lap[0] = N * (4.0 * (v[1] - v[0]) / h**2 - dv[1] / h)
        res = lap + self.mu * (1.0 + v[:-1]) ** self.p
        return float(np.max(np.abs(res))) / (1.0 + self.v_max) ** self.p

    def energy_from_v(self):
        """``(1/2)(alpha/lam)^2 mu int (1+v)^p v`` by Simpson quadrature."""
        vals = self.v.values
        integral = ball_integral(self.v.grid, (1.0 + vals) ** self.p * vals)
        return 0.5 * (self.alpha / self.lam) ** 2 * self.mu * integral


@dataclass(frozen=True, eq=False)
class BellCurve:
    """Sampled ``(lam, mu, E)`` with the turning and endpoint data."""

    lambdas: np.ndarray
    mu: np.ndarray
    E: np.ndarray
    lambda_t: float
    mu_t: float
    E_t: float
    E0: float
    E_inf: float
    lambda_plus: float
    v_max_last: float
    v_growth: float

    def summary(self):
        return {
            "lambda_t": self.lambda_t,
            "mu_t": self.mu_t,
            "E_at_lambda_t": self.E_t,
            "E0": self.E0,
            "E_inf": self.E_inf,
            "lambda_plus": self.lambda_plus,
        }


def _positive_lambda(table, geom, lam):
    lp = lambda_plus(table, geom)
    if not (0 < lam < lp * (1.0 - THRESHOLD_RTOL)):
        raise DomainError(f"lambda={lam!r} must lie in (0, lambda_plus={lp!r})")
    return lp


def gelfand_vmax(table, geom, lam):
    """``|v|_inf = v(0)`` in closed form, for ``0 < lam < lam_plus``."""
    _positive_lambda(table, geom, lam)
    bp = branch_point(table, geom, lam)
    if not bp.alpha > 0:
        raise DomainError(f"alpha={bp.alpha!r} is not positive")
    p = table.exponent
    c = (lam * bp.R_of_lambda**2) ** (-1.0 / (p - 1.0))
    return c * float(table.u0_at_0) / bp.alpha - 1.0


def to_gelfand(table, geom, lam, grid=None):
    """Gelfand solution induced by the branch point at ``lam``."""
    _positive_lambda(table, geom, lam)
    if grid is None:
        grid = make_grid(geom.dim, geom.R_N, DEFAULT_N)
    bp = branch_point(table, geom, lam)
    if not bp.alpha > 0:
        raise DomainError(f"alpha={bp.alpha!r} is not positive")
    alpha, psi, dpsi = reconstruct_psi(table, geom, lam, grid, return_slope=True)
    v = RadialField(grid, (lam / alpha) * psi.values)
    dv = RadialField(grid, (lam / alpha) * dpsi.values)
    return GelfandPoint(
        lam=float(lam),
        mu=float(bp.mu),
        v=v,
        dv=dv,
        E=float(bp.energy),
        v_max=float(v.values.max()),
        alpha=float(alpha),
        p=float(table.exponent),
    )


def _sign_changes(d):
    s = np.sign(d[d != 0])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def bell_curve(table, geom, samples):
    """``(lam, mu, E)`` on ``samples`` uniform loads over ``[0, lam_plus]``.

    Raises :class:`BendingPatternError` unless ``mu`` rises strictly before
    ``lambda_t``, falls strictly after it, and ``E`` rises throughout.
    """
    if int(samples) != samples or samples < MIN_BELL_SAMPLES:
        raise DomainError(f"need at least {MIN_BELL_SAMPLES} samples")
    lp = lambda_plus(table, geom)
    lams = np.linspace(0.0, lp, int(samples))
    pts = [branch_point(table, geom, x) for x in lams]
    mu = np.array([pt.mu for pt in pts], dtype=float)
    E = np.array([pt.energy for pt in pts])
    lt = lambda_turn(table, geom)

    dmu = np.diff(mu)
    left = lams[1:] <= lt
    right = lams[:-1] >= lt
    if not np.all(dmu[left] > 0) or not np.all(dmu[right] < 0):
        raise BendingPatternError("mu is not monotone on both sides of lambda_t")
    if _sign_changes(dmu) != 1:
        raise BendingPatternError(f"mu differences change sign {_sign_changes(dmu)} times")
    if not np.all(np.diff(E) > 0):
        raise BendingPatternError("energy is not strictly increasing")

    turn = branch_point(table, geom, lt)
    # growth of |v|_inf towards lam_plus, as a log-log slope against lam_plus - lam
    l1, l2 = lams[-3], lams[-2]
    v1, v2 = gelfand_vmax(table, geom, l1), gelfand_vmax(table, geom, l2)
    growth = math.log(v2 / v1) / math.log((lp - l1) / (lp - l2))
    return BellCurve(
        lambdas=lams,
        mu=mu,
        E=E,
        lambda_t=float(lt),
        mu_t=float(turn.mu),
        E_t=float(turn.energy),
        E0=float(E[0]),
        E_inf=float(E[-1]),
        lambda_plus=float(lp),
        v_max_last=float(v2),
        v_growth=float(growth),
    )
