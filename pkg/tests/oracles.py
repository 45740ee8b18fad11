"""Independent reference computations used to freeze expected values.

None of these share code with the package beyond numpy and scipy.special.
They are slow-ish and deliberately simple.
"""

import math

import numpy as np


def unit_ball_volume(N):
    return math.pi ** (N / 2) / math.gamma(N / 2 + 1)


def sphere_area(N):
    return N * unit_ball_volume(N)


def _rk4_shoot(N, p, h):
    """Fixed-step RK4 for w'' = -w^p - (N-1)/s w', w(0)=1, up to the first zero.

    The state carries q = int_0^s t^(N-1) w^p dt and e = int_0^s t^(N-1) w^(p+1) dt.
    Returns (r0, w'(r0), q(r0), e(r0)).
    """

    def f(s, y):
        w, dw, _, _ = y
        wp = max(w, 0.0) ** p
        return np.array([dw, -wp - (N - 1) / s * dw, s ** (N - 1) * wp, s ** (N - 1) * wp * max(w, 0.0)])

    def step(s, y, dt):
        k1 = f(s, y)
        k2 = f(s + dt / 2, y + dt / 2 * k1)
        k3 = f(s + dt / 2, y + dt / 2 * k2)
        k4 = f(s + dt, y + dt * k3)
        return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    s = h
    c = 1.0 / (2 * N)
    w = 1 - c * s**2 + p * s**4 / (8 * N * (N + 2))
    dw = -2 * c * s + p * s**3 / (2 * N * (N + 2))
    y = np.array([w, dw, s**N / N, s**N / N])
    while True:
        y_new = step(s, y, h)
        if y_new[0] <= 0:
            break
        s, y = s + h, y_new
    # secant on the length of the last partial step
    a, b = 0.0, h
    ya, yb = y[0], y_new[0]
    for _ in range(60):
        m = b - yb * (b - a) / (yb - ya)
        ym = step(s, y, m)[0]
        a, ya, b, yb = b, yb, m, ym
        if abs(ym) < 1e-16:
            break
    y_end = step(s, y, b)
    return s + b, y_end[1], y_end[2], y_end[3]


def lane_emden_reference(N, p, h=2e-3):
    """``u0(0), u0'(1), I_p, J_{p+1}`` by RK4 with one Richardson step."""
    coarse = np.array(_rk4_shoot(N, p, h))
    fine = np.array(_rk4_shoot(N, p, h / 2))
    r0, dw, q, e = (16 * fine - coarse) / 15
    k = r0 ** (2 / (p - 1))
    S = sphere_area(N)
    return {
        "u0_at_0": k,
        "du0_at_1": k * r0 * dw,
        "Ip_total": S * k**p * r0 ** (-N) * q,
        "Jp1_total": S * k ** (p + 1) * r0 ** (-N) * e,
    }


def lambda_plus_reference(N, p, Ip):
    R_N = unit_ball_volume(N) ** (-1 / N)
    return Ip ** (1 - 1 / p) * R_N ** (-(N / p) * (1 - p * (N - 2) / N))


def sobolev_power_iteration(N, t, n=4001, iters=3000):
    """``Lambda(t)`` on the unit-volume ball by nonlinear power iteration.

    Standard second-order finite differences in ``r`` with a trapezoid
    weight; ``w <- (-Laplace)^{-1} w^(t-1)``.
    """
    from scipy.linalg import solve_banded

    R = unit_ball_volume(N) ** (-1 / N)
    r = np.linspace(0, R, n)
    h = r[1]
    S = sphere_area(N)
    # unknowns r_0..r_{n-2}; conservative form with half-point radii
    rp = (r[:-1] + h / 2) ** (N - 1)
    rm = np.concatenate([[0.0], (r[1:-1] - h / 2) ** (N - 1)])
    weight = S * np.concatenate([[(h / 2) ** N / N], r[1:-1] ** (N - 1) * h])
    ab = np.zeros((3, n - 1))
    diag = S * (rp + rm) / h
    off = -S * rp[:-1] / h
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    w = R**2 - r[:-1] ** 2
    for _ in range(iters):
        w = solve_banded((1, 1), ab, weight * w ** (t - 1))
        energy = w @ (diag * w) + 2 * (off @ (w[:-1] * w[1:]))
        w /= math.sqrt(energy)
    return float((weight @ w**t) ** (-2 / t))
