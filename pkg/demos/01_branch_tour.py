"""A walk along the plasma branch on the unit-area disk (p = 2).

Prints the closed-form branch next to the Newton solver at a handful of
loads, then steps past the positivity threshold where a free boundary
appears.

    python3 demos/01_branch_tour.py
"""

import numpy as np

from plasma_branch import branch as br
from plasma_branch import solver as so
from plasma_branch.lane_emden import build_lane_emden
from plasma_branch.radial import ball_geometry, make_grid

DIM, P = 2, 2.0

geom = ball_geometry(DIM)
table = build_lane_emden(DIM, P)
lp = br.lambda_plus(table, geom)
lt = br.lambda_turn(table, geom)
print(f"Lane-Emden profile: u0(0) = {table.u0_at_0:.10f}, int u0^p = {table.Ip_total:.10f}")
print(f"positivity threshold lambda_plus = {lp:.12f}")
print(f"mu peaks at lambda_t = {lt:.12f} ({lt / lp:.4f} lambda_plus)\n")

grid = make_grid(DIM, geom.R_N, so.DEFAULT_GRID_N)
lams = np.array([0.0, 0.25, 0.5, 0.75, 0.95, 1.25, 1.5]) * lp
sols = so.solve_sweep(geom, P, lams, grid, max_step=lp / 100)

print(f"{'lambda/lp':>9} {'regime':>13} {'alpha (closed)':>16} {'alpha (Newton)':>16} {'E (closed)':>12} {'iters':>5}")
for lam, sol in zip(lams, sols):
    bp = br.branch_point(table, geom, lam)
    print(
        f"{lam / lp:9.2f} {bp.regime:>13} {bp.alpha:16.10f} {sol.alpha:16.10f}"
        f" {bp.energy:12.8f} {sol.newton_iters:5d}"
    )

sol = sols[-1]
print(
    f"\nat 1.5 lambda_plus the plasma occupies r < {so.free_boundary_radius(sol):.5f};"
    f" the closed form puts the free boundary at R = {br.R_of_lambda(table, geom, sol.lam):.5f}"
)
