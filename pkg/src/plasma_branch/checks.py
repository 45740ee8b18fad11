"""Named invariant checks for one ``(N, p)``, shared by ``verify`` and the tests.

Each check returns a :class:`CheckResult` with the measured value and the
tolerance it was held to.  Tolerances can be overridden by name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import branch as br
from .errors import PlasmaBranchError
from .gelfand import bell_curve, to_gelfand
from .lane_emden import cached_lane_emden
from .radial import ball_geometry, make_grid
from .solver import (
    DEFAULT_GRID_N,
    derivative_fields,
    entropy_identity_defect,
    free_boundary_radius,
    mean_value_defect,
    solve_sweep,
)
from .spectral import (
    eigen_L,
    eigen_residual,
    energy_inequality_slack,
    fourier_relation_defect,
    sobolev_Lambda,
    sobolev_Lambda_oracle,
    thresholds,
)

__all__ = ["CheckResult", "DEFAULT_TOLERANCES", "run_checks", "check_names"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        text = f"{flag} {self.name}: {self.value:.3e} (tol {self.tol:.1e})"
        return f"{text} {self.detail}" if self.detail else text


DEFAULT_TOLERANCES = {
    "lane_emden.residual": 1e-6,
    "lane_emden.boundary": 1e-10,
    "branch.lambda_plus_planar": 1e-12,
    "branch.alpha_at_lambda_plus": 1e-9,
    "branch.E0": 1e-8,
    "branch.E_inf": 1e-6,
    "branch.monotonicity": 0.0,
    "branch.I_derivatives": 1e-6,
    "branch.free_boundary_alpha": 1e-6,
    "solver.closed_form": 5e-6,
    "solver.dalpha_identity": 1e-8,
    "solver.dE_identity": 1e-7,
    "solver.entropy_identity": 1e-6,
    "solver.free_boundary_radius": 2.0,
    "spectral.sigma1_positive": 0.0,
    "spectral.preig_chain": 1e-10,
    "spectral.eq_sigma_mu": 1e-8,
    "spectral.eigen_residual": 1e-6,
    "spectral.fourier_relation": 1e-6,
    "spectral.energy_inequality": 1e-8,
    "spectral.sobolev_oracle": 1e-5,
    "spectral.lambda1_equals_lambda_plus": 1e-5,
    "gelfand.q_residual": 1e-6,
    "gelfand.energy": 1e-7,
    "gelfand.single_bend": 0.0,
}


def check_names():
    return list(DEFAULT_TOLERANCES)


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


class _Runner:
    def __init__(self, dim, p, grid_n, tolerances, table, modes):
        self.geom = ball_geometry(dim)
        self.p = float(p)
        self.tol = dict(DEFAULT_TOLERANCES)
        unknown = set(tolerances or ()) - set(self.tol)
        if unknown:
            raise KeyError(f"unknown check name(s): {', '.join(sorted(unknown))}")
        self.tol.update(tolerances or {})
        self.table = table if table is not None else cached_lane_emden(dim, p)
        self.grid = make_grid(dim, self.geom.R_N, grid_n)
        self.modes = modes
        self.lp = br.lambda_plus(self.table, self.geom)
        self.results = []

    def record(self, name, value, passed=None, detail=""):
        tol = self.tol[name]
        ok = (value <= tol) if passed is None else passed
        ok = bool(ok) and math.isfinite(value)
        self.results.append(CheckResult(name, ok, float(value), tol, detail))

    def guard(self, section, fn):
        try:
            fn()
        except (PlasmaBranchError, ArithmeticError, ValueError) as exc:
            self.results.append(CheckResult(f"{section}.aborted", False, math.nan, math.nan, repr(exc)))

    # -- lane_emden -----------------------------------------------------------

    def lane_emden(self):
        t = self.table
        self.record("lane_emden.residual", t.equation_residual() / t.u0_at_0**t.exponent)
        interior = t.u0[:-1]
        ok = bool(np.all(interior > 0)) and t.du0_at_1 < 0
        ok = ok and abs(t.u0_at_1) <= self.tol["lane_emden.boundary"]
        self.record("lane_emden.boundary", abs(t.u0_at_1), passed=ok)

    # -- branch ---------------------------------------------------------------

    def branch(self):
        t, g, lp = self.table, self.geom, self.lp
        if g.dim == 2:
            self.record("branch.lambda_plus_planar", _rel(br.lambda_plus_planar(t), lp))
        self.record("branch.alpha_at_lambda_plus", abs(br.branch_point(t, g, lp).alpha))
        grad, mixed = br.energy_integrals(t, g, 0.0, self.grid)
        self.record("branch.E0", max(abs(grad - g.torsion_energy), abs(mixed - g.torsion_energy)))
        if g.dim == 2:
            self.record("branch.E_inf", abs(br.energy_of(t, g, lp) - (self.p + 1) / (16 * math.pi)))

        lams = np.linspace(0.0, lp, 201)[:-1]
        pts = [br.branch_point(t, g, x) for x in lams]
        a = np.array([q.alpha for q in pts])
        E = np.array([q.energy for q in pts])
        hi = np.linspace(lp, 3 * lp, 101)[1:]
        a_hi = np.array([br.branch_point(t, g, x).alpha for x in hi])
        worst = max(np.max(np.diff(a)), -np.min(np.diff(E)), np.max(np.diff(a_hi)))
        self.record("branch.monotonicity", worst, passed=worst < 0)

        Rs = g.R_N * np.logspace(-0.5, 1.0, 7)
        errs = []
        for R in Rs:
            d = 1e-5 * R
            fd = (br.script_I(t, g, R + d) - br.script_I(t, g, R - d)) / (2 * d)
            errs.append(_rel(fd, br.script_I_prime(t, g, R)))
        self.record("branch.I_derivatives", max(errs))

        lam = 1.5 * lp
        self.record(
            "branch.free_boundary_alpha",
            _rel(br.alpha_free_boundary_closed_form(t, g, lam), br.branch_point(t, g, lam).alpha),
        )

    # -- solver ---------------------------------------------------------------

    def solver(self):
        t, g, lp = self.table, self.geom, self.lp
        lams = np.linspace(0.0, 0.99 * lp, 6)
        sols = solve_sweep(g, self.p, lams, self.grid, max_step=lp / 50)
        err = 0.0
        for s in sols:
            bp = br.branch_point(t, g, s.lam)
            err = max(err, _rel(s.alpha, bp.alpha), _rel(s.energy, bp.energy))
        self.record("solver.closed_form", err)

        s = sols[3]
        f = derivative_fields(s, self.p)
        self.record("solver.dalpha_identity", abs(f.dalpha + f.mean_w))
        self.record("solver.dE_identity", _rel(f.dE, f.rho_eta))
        self.record(
            "solver.entropy_identity",
            max(entropy_identity_defect(s, f, self.p), mean_value_defect(s)),
        )

        lam = 1.5 * lp
        path = solve_sweep(g, self.p, np.linspace(0.0, lam, 76), self.grid, max_step=lp / 50)
        r_fb = free_boundary_radius(path[-1])
        R = br.R_of_lambda(t, g, lam)
        cells = math.inf if r_fb is None else abs(r_fb - R) / self.grid.h
        self.record("solver.free_boundary_radius", cells)

    # -- spectral -------------------------------------------------------------

    def spectral(self):
        g, lp, p = self.geom, self.lp, self.p
        lams = np.linspace(0.0, 0.995 * lp, 11)
        sols = solve_sweep(g, p, lams, self.grid, max_step=lp / 100)
        L2p = sobolev_Lambda(g, 2 * p)
        s1, chain, eq41, eres, four, slack = [], [], 0.0, 0.0, 0.0, math.inf
        for s in sols:
            rep = eigen_L(g, p, s, modes=self.modes)
            s1.append(rep.sigma1)
            chain.append((rep.sigma1 - rep.nu1, rep.nu1 - (L2p - s.lam * p)))
            eres = max(eres, eigen_residual(rep, s, 1))
            if s.lam > 0:
                eq41 = max(eq41, _rel(rep.tau * (1.0 / rep.mu1 - 1.0), rep.sigma1))
                f = derivative_fields(s, p)
                four = max(four, *(fourier_relation_defect(rep, s, f, p, j) for j in (1, 2)))
                slack = min(slack, energy_inequality_slack(rep, s, f, p))
        self.record("spectral.sigma1_positive", min(s1), passed=min(s1) > 0)
        gap = min(c[0] for c in chain)
        lower = min(c[1] for c in chain)
        self.record(
            "spectral.preig_chain",
            min(gap, lower),
            passed=gap > self.tol["spectral.preig_chain"] and lower >= 0,
            detail=f"sigma1-nu1 >= {gap:.3e}, nu1-(Lambda(2p)-lam p) >= {lower:.3e}",
        )
        self.record("spectral.eq_sigma_mu", eq41)
        self.record("spectral.eigen_residual", eres)
        self.record("spectral.fourier_relation", four)
        self.record("spectral.energy_inequality", slack, passed=slack >= -self.tol["spectral.energy_inequality"])

        self.record("spectral.sobolev_oracle", _rel(sobolev_Lambda_oracle(g, 2 * p), L2p))
        if g.dim == 2:
            lam1 = thresholds(g, p).lambda1
            self.record("spectral.lambda1_equals_lambda_plus", _rel(lam1, lp))

    # -- gelfand --------------------------------------------------------------

    def gelfand(self):
        t, g, lp = self.table, self.geom, self.lp
        qres, eres = 0.0, 0.0
        for k in range(1, 12):
            pt = to_gelfand(t, g, k * lp / 12)
            qres = max(qres, pt.q_residual())
            eres = max(eres, _rel(pt.energy_from_v(), pt.E))
        self.record("gelfand.q_residual", qres)
        self.record("gelfand.energy", eres)
        curve = bell_curve(t, g, 200)
        i = int(np.argmax(curve.mu))
        lams = curve.lambdas
        ok = lams[max(i - 1, 0)] <= curve.lambda_t <= lams[min(i + 1, lams.size - 1)]
        self.record("gelfand.single_bend", 0.0, passed=ok)


def run_checks(dim, p, grid_n=DEFAULT_GRID_N, tolerances=None, table=None, modes=2):
    """Run every named check and return the list of results in a fixed order."""
    runner = _Runner(dim, p, grid_n, tolerances, table, modes)
    for section in ("lane_emden", "branch", "solver", "spectral", "gelfand"):
        runner.guard(section, getattr(runner, section))
    return runner.results
