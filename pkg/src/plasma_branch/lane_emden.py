"""Radial Lane-Emden ground state on the unit ball.

The profile ``u0`` solves ``-Laplace u0 = u0**p`` in ``B_1`` with ``u0 = 0`` on
the boundary.  No shooting is needed.  Integrate the normalized problem

    w'' + (N-1)/r w' = -w**p,   w(0) = 1,   w'(0) = 0

up to its first zero ``r0`` and rescale: ``u0(r) = k * w(r0 r)`` with
``k = r0**(2/(p-1))``.  The integrals ``int_{B_r} u0**p`` and
``int_{B_r} u0**(p+1)`` ride along as extra ODE components, so they inherit
the integrator accuracy instead of a grid quadrature error.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly, CubicHermiteSpline
from scipy.special import roots_jacobi

from .errors import ConvergenceError, DomainError
from .radial import RadialGrid, ball_geometry, hermite_second_derivative, make_grid

__all__ = [
    "LaneEmdenTable",
    "build_lane_emden",
    "eval_u0",
    "Ip_of",
    "Jp1_of",
    "save_table",
    "load_table",
    "cached_lane_emden",
    "CACHE_ENV",
]

CACHE_ENV = "PLASMA_BRANCH_CACHE"
CACHE_VERSION = 1
DEFAULT_N = 2049
DEFAULT_RTOL = 1e-13
START_RADIUS = 1e-6


@dataclass(frozen=True, eq=False)
class LaneEmdenTable:
    """Samples of ``u0``, ``u0'`` and cumulative integrals on ``[0, 1]``.

    ``Ip_cum[i]`` is the integral of ``u0**p`` over ``B_{r_i}``, and
    ``Jp1_cum[i]`` the integral of ``u0**(p+1)``.  ``first_zero`` is the
    zero ``r0`` of the normalized profile that fixed the scaling.
    """

    dim: int
    exponent: float
    grid: RadialGrid
    u0: np.ndarray
    du0: np.ndarray
    Ip_cum: np.ndarray
    Jp1_cum: np.ndarray
    u0_at_0: float
    du0_at_1: float
    Ip_total: float
    Jp1_total: float
    first_zero: float
    rtol: float = DEFAULT_RTOL

    @property
    def p(self):
        return self.exponent

    @property
    def u0_at_1(self):
        return float(self.u0[-1])

    @cached_property
    def _u0_spline(self):
        # quintic Hermite: the equation supplies u0'' at every node
        r = self.grid.nodes
        d2 = np.empty_like(r)
        d2[0] = -self.u0_at_0**self.exponent / self.dim
        d2[1:] = -np.maximum(self.u0[1:], 0.0) ** self.exponent - (self.dim - 1) / r[1:] * self.du0[1:]
        return BPoly.from_derivatives(r, np.column_stack([self.u0, self.du0, d2]))

    @cached_property
    def _Ip_spline(self):
        return CubicHermiteSpline(self.grid.nodes, self.Ip_cum, self._density(self.exponent))

    @cached_property
    def _Jp1_spline(self):
        return CubicHermiteSpline(self.grid.nodes, self.Jp1_cum, self._density(self.exponent + 1))

    def _density(self, q):
        geom = ball_geometry(self.dim)
        r = self.grid.nodes
        return geom.surface * r ** (self.dim - 1) * np.maximum(self.u0, 0.0) ** q

    def equation_residual(self):
        """Max over interior nodes of ``|u0'' + (N-1)/r u0' + u0**p|``.

        ``u0''`` comes from the fourth-order Hermite difference on the
        stored values and slopes.
        """
        u, du, r = self.u0, self.du0, self.grid.nodes
        d2 = hermite_second_derivative(u, du, self.grid.h)
        res = d2 + (self.dim - 1) / r[1:-1] * du[1:-1] + np.maximum(u[1:-1], 0.0) ** self.exponent
        return float(np.max(np.abs(res)))

    def cache_key(self):
        return _cache_key(self.dim, self.exponent, self.grid.n, self.rtol)


def _check_exponent(dim, p):
    if not (p > 1.0 and math.isfinite(p)):
        raise DomainError(f"Lane-Emden exponent must satisfy p > 1, got {p!r}")
    if dim >= 3 and p >= (dim + 2) / (dim - 2):
        raise DomainError(
            f"Lane-Emden exponent p={p!r} is not subcritical for N={dim} "
            f"(needs p < {(dim + 2) / (dim - 2)})"
        )


def build_lane_emden(dim, p, n=DEFAULT_N, rtol=DEFAULT_RTOL, radius_cap=1e3):
    """Construct the ground-state table by integrating once and rescaling."""
    geom = ball_geometry(dim)
    N = geom.dim
    _check_exponent(N, p)
    surf = geom.surface

    def rhs(r, y):
        w, dw = y[0], y[1]
        wp = w if w > 0.0 else 0.0
        wpp = wp**p
        m = surf * r ** (N - 1)
        return [dw, -(N - 1) / r * dw - wpp, m * wpp, m * wpp * wp]

    def hit_zero(r, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1

    e = START_RADIUS
    # Taylor seed: w = 1 - r^2/(2N) + O(r^4), both integrals ~ |B_e|
    y0 = [1.0 - e**2 / (2 * N), -e / N, geom.omega_N * e**N, geom.omega_N * e**N]

    def integrate(max_step):
        sol = solve_ivp(
            rhs,
            (e, radius_cap),
            y0,
            method="DOP853",
            rtol=rtol,
            atol=rtol * 1e-2,
            events=hit_zero,
            dense_output=True,
            max_step=max_step,
        )
        if sol.status != 1 or not len(sol.t_events[0]):
            raise ConvergenceError(
                f"normalized Lane-Emden profile has no zero below r={radius_cap} "
                f"(N={N}, p={p}); exponent too close to critical"
            )
        return sol

    # The first pass only locates r0.  The second caps the step at the
    # grid spacing so that dense-output error stays far below the
    # integrator tolerance; finite differences of the table would
    # otherwise amplify interpolation noise.
    r0 = float(integrate(np.inf).t_events[0][0])
    sol = integrate(r0 / (n - 1))
    r0 = float(sol.t_events[0][0])
    y_end = sol.y_events[0][0]
    k = r0 ** (2.0 / (p - 1.0))

    grid = make_grid(N, 1.0, n)
    s = grid.nodes[1:-1] * r0
    inner = s >= e
    Y = np.empty((4, s.size))
    Y[:, inner] = sol.sol(s[inner])
    if not inner.all():
        ss = s[~inner]
        Y[0, ~inner] = 1.0 - ss**2 / (2 * N)
        Y[1, ~inner] = -ss / N
        Y[2, ~inner] = geom.omega_N * ss**N
        Y[3, ~inner] = geom.omega_N * ss**N

    u0 = np.empty(n)
    du0 = np.empty(n)
    Ip = np.empty(n)
    Jp1 = np.empty(n)
    u0[0], du0[0], Ip[0], Jp1[0] = k, 0.0, 0.0, 0.0
    u0[1:-1] = k * Y[0]
    du0[1:-1] = k * r0 * Y[1]
    Ip[1:-1] = k**p * r0 ** (-N) * Y[2]
    Jp1[1:-1] = k ** (p + 1) * r0 ** (-N) * Y[3]
    u0[-1] = 0.0
    du0[-1] = k * r0 * y_end[1]
    Ip[-1] = k**p * r0 ** (-N) * y_end[2]
    Jp1[-1] = k ** (p + 1) * r0 ** (-N) * y_end[3]
    # dense output can wiggle by an ulp; keep the cumulative data monotone
    Ip = np.maximum.accumulate(Ip)
    Jp1 = np.maximum.accumulate(Jp1)
    for a in (u0, du0, Ip, Jp1):
        a.setflags(write=False)
    return LaneEmdenTable(
        dim=N,
        exponent=float(p),
        grid=grid,
        u0=u0,
        du0=du0,
        Ip_cum=Ip,
        Jp1_cum=Jp1,
        u0_at_0=float(k),
        du0_at_1=float(du0[-1]),
        Ip_total=float(Ip[-1]),
        Jp1_total=float(Jp1[-1]),
        first_zero=r0,
        rtol=float(rtol),
    )


def _check_unit_radius(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r >= 0.0)) or np.any(r > 1.0):
        raise DomainError("radius must lie in [0, 1]")
    return r


def eval_u0(table, r):
    """``(u0(r), u0'(r))`` by quintic Hermite interpolation.

    At the nodes the stored samples come back up to round-off.
    """
    r = _check_unit_radius(r)
    spl = table._u0_spline
    val, slope = spl(r), spl(r, 1)
    if r.ndim == 0:
        return float(val), float(slope)
    return val, slope


def _ball_power_integral(table, r, q, spline):
    # Inside the first cell the cumulative integral behaves like r**N, which
    # a cubic cannot follow for N >= 4; use the centre expansion
    # u0 = u0(0) (1 - c r^2), c = u0(0)**(p-1) / (2N), instead.
    r = _check_unit_radius(r)
    out = np.asarray(spline(r), dtype=float)
    small = r < table.grid.h
    if np.any(small):
        N = table.dim
        u00 = table.u0_at_0
        c = u00 ** (table.exponent - 1.0) / (2 * N)
        rs = r[small] if r.ndim else r
        series = (
            ball_geometry(N).omega_N * u00**q * rs**N
            * (1.0 - q * c * N * rs**2 / (N + 2))
        )
        if r.ndim:
            out[small] = series
        else:
            out = np.asarray(series)
    edge = r > 1.0 - table.grid.h
    if np.any(edge):
        rs = r[edge] if r.ndim else r
        tail = _boundary_tail(table, rs, q)
        total = table.Ip_total if q == table.exponent else table.Jp1_total
        if r.ndim:
            out[edge] = total - tail
        else:
            out = np.asarray(total - tail)
    return float(out) if r.ndim == 0 else out


_JACOBI_NODES = 12


def _boundary_tail(table, s, q):
    # int_s^1 |S| t^(N-1) u0^q dt in the last cell.  Writing u0 = (1-t) g(t)
    # with g smooth, Gauss-Jacobi with weight (1-t)^q integrates g^q t^(N-1)
    # and keeps the (1-t)^(q+1) behaviour of the tail exact, which a cubic
    # in s cannot reproduce.
    x, w = roots_jacobi(_JACOBI_NODES, q, 0.0)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    half = 0.5 * (1.0 - s)
    t = s[:, None] + half[:, None] * (1.0 + x[None, :])
    u = table._u0_spline(t)
    gap = 1.0 - t
    g = np.divide(u, gap, out=np.zeros_like(u), where=gap > 0)
    vals = t ** (table.dim - 1) * np.maximum(g, 0.0) ** q
    out = ball_geometry(table.dim).surface * half ** (q + 1.0) * (vals @ w)
    return out if out.size > 1 else float(out[0])


def Ip_of(table, r):
    """``int_{B_r} u0**p``; Hermite interpolation with the exact derivative."""
    return _ball_power_integral(table, r, table.exponent, table._Ip_spline)


def Jp1_of(table, r):
    """``int_{B_r} u0**(p+1)``."""
    return _ball_power_integral(table, r, table.exponent + 1.0, table._Jp1_spline)


# -- cache -------------------------------------------------------------------

_SCALARS = ("u0_at_0", "du0_at_1", "Ip_total", "Jp1_total", "first_zero", "rtol")
_ARRAYS = ("u0", "du0", "Ip_cum", "Jp1_cum")


def _cache_key(dim, p, n, rtol):
    tag = f"v{CACHE_VERSION}|{dim}|{float(p).hex()}|{n}|{float(rtol).hex()}"
    return hashlib.sha256(tag.encode()).hexdigest()[:20]


def save_table(table, path):
    """Write ``table`` to ``path`` (``.npz``); floats are stored bit-exactly."""
    path = Path(path)
    payload = {name: getattr(table, name) for name in _ARRAYS}
    payload.update({name: np.float64(getattr(table, name)) for name in _SCALARS})
    payload["header"] = np.array(
        [CACHE_VERSION, table.dim, table.grid.n], dtype=np.int64
    )
    payload["exponent"] = np.float64(table.exponent)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, **payload)
    os.replace(tmp, path)
    return path


def load_table(path):
    with np.load(Path(path)) as data:
        version, dim, n = (int(x) for x in data["header"])
        if version != CACHE_VERSION:
            raise DomainError(f"cache version {version} not supported")
        arrays = {name: data[name].copy() for name in _ARRAYS}
        scalars = {name: float(data[name]) for name in _SCALARS}
        p = float(data["exponent"])
    for a in arrays.values():
        a.setflags(write=False)
    return LaneEmdenTable(
        dim=dim, exponent=p, grid=make_grid(dim, 1.0, n), **arrays, **scalars
    )


def cached_lane_emden(dim, p, n=DEFAULT_N, rtol=DEFAULT_RTOL, cache_dir=None):
    """:func:`build_lane_emden` backed by an on-disk cache.

    The directory is ``cache_dir`` or the ``PLASMA_BRANCH_CACHE`` environment
    variable; with neither set this is a plain build.
    """
    cache_dir = cache_dir or os.environ.get(CACHE_ENV)
    if not cache_dir:
        return build_lane_emden(dim, p, n, rtol)
    path = Path(cache_dir) / f"lane_emden_{_cache_key(dim, p, n, rtol)}.npz"
    if path.exists():
        return load_table(path)
    table = build_lane_emden(dim, p, n, rtol)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_table(table, path)
    return table
