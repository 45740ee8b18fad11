"""The (mu, E) bell curve of the Gelfand problem induced by the branch.

Every load below lambda_plus gives a solution of -Laplace v = mu (1+v)^p.
mu rises, turns once, and falls back to zero while the energy keeps
growing.  The script prints the turning record and a coarse text plot, and
writes the full curve to bell.csv if a path is given.

    python3 demos/02_bell_curve.py [bell.csv]
"""

import sys

import numpy as np

from plasma_branch import gelfand as gf
from plasma_branch.lane_emden import build_lane_emden
from plasma_branch.radial import ball_geometry

DIM, P = 2, 2.0

geom = ball_geometry(DIM)
table = build_lane_emden(DIM, P)
curve = gf.bell_curve(table, geom, 400)

for key, value in curve.summary().items():
    print(f"{key:>14} = {value:.12g}")
print(f"E_inf * 16 pi = {curve.E_inf * 16 * np.pi:.10f}  (p + 1 = {P + 1:g})")

mid = gf.to_gelfand(table, geom, 0.5 * curve.lambda_plus)
print(f"\nat lambda_plus / 2: mu = {mid.mu:.6f}, |v|_inf = {mid.v_max:.6f},"
      f" residual = {mid.q_residual():.1e}")

print("\n  E   mu ->")
width = 60
for k in range(0, curve.lambdas.size, 20):
    bar = int(round(width * curve.mu[k] / curve.mu.max()))
    print(f"{curve.E[k]:.4f} {'#' * bar}")

if len(sys.argv) > 1:
    np.savetxt(
        sys.argv[1],
        np.column_stack([curve.lambdas, curve.mu, curve.E]),
        delimiter=",",
        header="lambda,mu,E",
        comments="",
        fmt="%.17g",
    )
    print(f"\nwrote {sys.argv[1]}")
