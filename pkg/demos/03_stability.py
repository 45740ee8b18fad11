"""Linear stability along the branch and the Sobolev thresholds.

sigma_1 is the first eigenvalue of the linearized nonlocal operator.  It
stays positive all the way to lambda_plus on the ball.  In the plane the
threshold lambda_1 built from the Sobolev constant Lambda(p+1) lands on
lambda_plus, while lambda_0 = Lambda(2p)/p sits below it.

    python3 demos/03_stability.py
"""

import numpy as np

from plasma_branch import branch as br
from plasma_branch import solver as so
from plasma_branch import spectral as sp
from plasma_branch.lane_emden import build_lane_emden
from plasma_branch.radial import ball_geometry, make_grid

for dim, p in [(2, 2.0), (3, 2.0)]:
    geom = ball_geometry(dim)
    table = build_lane_emden(dim, p)
    lp = br.lambda_plus(table, geom)
    consts = sp.thresholds(geom, p)
    print(f"N = {dim}, p = {p:g}: lambda_plus = {lp:.10f}, lambda_0 = {consts.lambda0:.10f}", end="")
    if consts.lambda1 is not None:
        print(f", lambda_1 = {consts.lambda1:.10f}")
    else:
        print()

    grid = make_grid(dim, geom.R_N, 4097)
    lams = np.linspace(0.0, 0.995 * lp, 8)
    print(f"  {'lambda/lp':>9} {'sigma_1':>12} {'mode':>4} {'nu_1':>12} {'Lambda(2p)-tau':>15}")
    for sol in so.solve_sweep(geom, p, lams, grid, max_step=lp / 100):
        rep = sp.eigen_L(geom, p, sol)
        print(
            f"  {sol.lam / lp:9.3f} {rep.sigma1:12.6f} {rep.sigma1_mode:4d}"
            f" {rep.nu1:12.6f} {consts.Lambda_2p - rep.tau:15.6f}"
        )
    print()
