import math

import numpy as np
import pytest

from plasma_branch import branch as br
from plasma_branch import gelfand as gf
from plasma_branch.errors import BendingPatternError, DomainError
from plasma_branch.radial import ball_geometry

CASES = [(2, 1.5), (2, 2.0), (2, 3.0), (3, 1.5), (3, 2.0), (4, 1.5)]


@pytest.mark.parametrize("case", CASES)
def test_reconstructed_field_solves_gelfand(tables, case):
    t = tables(*case)
    g = ball_geometry(case[0])
    lp = br.lambda_plus(t, g)
    for lam in np.linspace(0.02, 0.98, 11) * lp:
        pt = gf.to_gelfand(t, g, lam)
        assert pt.q_residual() <= 1e-6
        assert pt.energy_from_v() == pytest.approx(pt.E, rel=1e-7)
        assert pt.mu == pytest.approx(lam * pt.alpha ** (case[1] - 1), rel=1e-14)
        assert pt.mu > 0
        assert np.all(pt.v.values >= 0) and pt.v.values[-1] == 0.0
        assert pt.v_max == pytest.approx(gf.gelfand_vmax(t, g, lam), rel=1e-12)


def test_half_threshold_residual_three_dimensions(tables, geom3):
    t = tables(3, 2.0)
    pt = gf.to_gelfand(t, geom3, 0.5 * br.lambda_plus(t, geom3))
    assert pt.q_residual() <= 1e-6


def test_endpoint_limits(tables, geom2):
    t = tables(2, 2.0)
    lp = br.lambda_plus(t, geom2)
    small = gf.to_gelfand(t, geom2, 1e-6 * lp)
    assert small.mu < 1e-4 and small.v_max < 1e-5
    near = [gf.gelfand_vmax(t, geom2, lp * (1 - 10.0**-k)) for k in range(1, 8)]
    assert np.all(np.diff(near) > 0)
    assert near[-1] > 100 * near[0]
    mus = [br.branch_point(t, geom2, lp * (1 - 10.0**-k)).mu for k in range(1, 8)]
    assert np.all(np.diff(mus) < 0) and mus[-1] < 1e-3


def test_amplification_increases_along_branch(tables, geom2):
    t = tables(2, 3.0)
    lp = br.lambda_plus(t, geom2)
    ratios = [lam / br.branch_point(t, geom2, lam).alpha for lam in np.linspace(0.01, 0.99, 50) * lp]
    assert np.all(np.diff(ratios) > 0)


@pytest.mark.parametrize("case", CASES)
def test_bell_curve_shape(tables, case):
    t = tables(*case)
    g = ball_geometry(case[0])
    bell = gf.bell_curve(t, g, 201)
    assert bell.lambdas[0] == 0.0 and bell.lambdas[-1] == bell.lambda_plus
    assert bell.mu[0] == 0.0 and bell.mu[-1] == pytest.approx(0.0, abs=1e-9)
    assert bell.E0 == pytest.approx(g.torsion_energy, rel=1e-14)
    assert np.all(np.diff(bell.E) > 0)
    nearest = int(np.argmin(np.abs(bell.lambdas - bell.lambda_t)))
    assert int(np.argmax(bell.mu)) == nearest
    assert bell.mu_t >= bell.mu.max()
    assert bell.E0 < bell.E_t < bell.E_inf
    assert bell.v_max_last > 0 and bell.v_growth > 0


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_planar_energy_pair(tables, geom2, p):
    bell = gf.bell_curve(tables(2, p), geom2, 100)
    assert bell.E0 == pytest.approx(1 / (16 * math.pi), abs=1e-8)
    assert bell.E_inf == pytest.approx((p + 1) / (16 * math.pi), abs=1e-6)
    assert set(bell.summary()) == {"lambda_t", "mu_t", "E_at_lambda_t", "E0", "E_inf", "lambda_plus"}


def test_bell_curve_rejects_coarse_sampling(tables, geom2):
    with pytest.raises(DomainError):
        gf.bell_curve(tables(2, 2.0), geom2, 99)
    with pytest.raises(DomainError):
        gf.bell_curve(tables(2, 2.0), geom2, 150.5)


def test_wrong_turning_point_is_a_hard_failure(tables, geom2, monkeypatch):
    t = tables(2, 2.0)
    lp = br.lambda_plus(t, geom2)
    monkeypatch.setattr(gf, "lambda_turn", lambda table, geom: 0.2 * lp)
    with pytest.raises(BendingPatternError):
        gf.bell_curve(t, geom2, 100)


def test_domain_errors(tables, geom2):
    t = tables(2, 2.0)
    lp = br.lambda_plus(t, geom2)
    for lam in (0.0, -1.0, lp, 1.5 * lp):
        with pytest.raises(DomainError):
            gf.to_gelfand(t, geom2, lam)
        with pytest.raises(DomainError):
            gf.gelfand_vmax(t, geom2, lam)
