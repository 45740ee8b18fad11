import math

import numpy as np
import pytest

from oracles import lane_emden_reference
from plasma_branch.errors import DomainError
from plasma_branch.lane_emden import (
    CACHE_ENV,
    Ip_of,
    Jp1_of,
    build_lane_emden,
    cached_lane_emden,
    eval_u0,
    load_table,
    save_table,
)
from plasma_branch.radial import ball_geometry, ball_integral

# Frozen from oracles.lane_emden_reference (fixed-step RK4, h = 2e-3 and
# 1e-3, one Richardson step): u0(0), u0'(1), int u0^p, int u0^(p+1).
REFERENCE = {
    (2, 2.0): (8.534114771195641, -7.897071013107254, 49.61876055931392, 293.8821567894822),
    (3, 2.0): (18.94751724803309, -10.494980935712011, 131.88382002880536, 1384.1181769314255),
    (2, 3.0): (3.5739009819273346, -2.645123173347792, 16.61979905846105, 43.96141562592505),
    (2, 1.5): (49.15022020965391, -52.15402553895794, 327.6934069766766, 10681.581447413317),
    (3, 1.5): (178.22026695072822, -132.38429925774662, 1663.590167995337, 157309.44188397404),
    (4, 1.5): (504.0919293333753, -251.75688940714045, 4969.481807394391, 1042584.4014889207),
}


@pytest.mark.parametrize("case", sorted(REFERENCE))
def test_table_matches_rk4_oracle(tables, case):
    t = tables(*case)
    u00, du1, Ip, Jp1 = REFERENCE[case]
    assert t.u0_at_0 == pytest.approx(u00, rel=1e-9)
    assert t.du0_at_1 == pytest.approx(du1, rel=1e-9)
    assert t.Ip_total == pytest.approx(Ip, rel=1e-9)
    assert t.Jp1_total == pytest.approx(Jp1, rel=1e-9)


def test_oracle_reproduces_frozen_values():
    ref = lane_emden_reference(2, 2.0)
    assert ref["u0_at_0"] == pytest.approx(REFERENCE[(2, 2.0)][0], rel=1e-12)


@pytest.mark.parametrize("case", sorted(REFERENCE))
def test_profile_shape(tables, case):
    t = tables(*case)
    assert t.u0_at_1 == 0.0
    assert np.all(t.u0[:-1] > 0)
    assert np.all(np.diff(t.u0) < 0)
    assert t.du0[0] == 0.0
    # flux balance: -|S| u0'(1) = int u0^p
    assert -ball_geometry(case[0]).surface * t.du0_at_1 == pytest.approx(t.Ip_total, rel=1e-10)


@pytest.mark.parametrize("case", sorted(REFERENCE))
def test_equation_residual_small(tables, case):
    t = tables(*case)
    assert t.equation_residual() <= 1e-7 * t.u0_at_0**t.exponent


@pytest.mark.parametrize("case", [(2, 2.0), (3, 2.0), (2, 3.0)])
def test_residual_refines_at_fourth_order(case):
    # integer exponents keep u0^p smooth up to the boundary
    res = [build_lane_emden(*case, n=n).equation_residual() for n in (65, 129, 257)]
    assert res[0] / res[1] >= 8 and res[1] / res[2] >= 8


def test_cumulative_integrals_consistent(tables):
    t = tables(3, 2.0)
    grid = t.grid
    # the table lives on [0, 1]; integrate u0^p over B_1 by Simpson
    assert ball_integral(grid, t.u0**2) == pytest.approx(t.Ip_total, rel=1e-9)
    assert Ip_of(t, 1.0) == pytest.approx(t.Ip_total, rel=1e-14)
    assert Jp1_of(t, 1.0) == pytest.approx(t.Jp1_total, rel=1e-14)
    # Ip(r) = -|S| r^(N-1) u0'(r)
    for r in (0.1, 0.37, 0.8):
        u, du = eval_u0(t, r)
        assert Ip_of(t, r) == pytest.approx(-ball_geometry(3).surface * r**2 * du, rel=1e-9)


def test_center_series_for_tiny_radius(tables):
    t = tables(4, 1.5)
    r = 1e-5
    omega = ball_geometry(4).omega_N
    assert Ip_of(t, r) == pytest.approx(omega * t.u0_at_0**1.5 * r**4, rel=1e-8)
    assert Ip_of(t, 0.0) == 0.0


def test_eval_reproduces_nodes(tables):
    t = tables(2, 2.0)
    u, du = eval_u0(t, t.grid.nodes[::7])
    np.testing.assert_allclose(u, t.u0[::7], rtol=0, atol=1e-13 * t.u0_at_0)
    np.testing.assert_allclose(du, t.du0[::7], rtol=0, atol=1e-10 * abs(t.du0_at_1))
    with pytest.raises(DomainError):
        eval_u0(t, 1.5)


@pytest.mark.parametrize("dim,p", [(2, 1.0), (2, 0.5), (3, 5.0), (4, 3.5), (2, math.inf)])
def test_rejects_exponents(dim, p):
    with pytest.raises(DomainError):
        build_lane_emden(dim, p, n=65)


def test_supercritical_branch_exponent_allowed_for_lane_emden():
    # p_N < p < (N+2)/(N-2) is still a valid Lane-Emden exponent
    t = build_lane_emden(3, 4.0, n=257)
    assert t.u0_at_0 > 0


def test_cache_roundtrip(tmp_path, tables):
    t = tables(2, 1.5)
    path = tmp_path / "t.npz"
    save_table(t, path)
    back = load_table(path)
    np.testing.assert_array_equal(back.u0, t.u0)
    np.testing.assert_array_equal(back.Ip_cum, t.Ip_cum)
    assert back.Ip_total == t.Ip_total and back.exponent == t.exponent


def test_cached_builder_uses_env(tmp_path, monkeypatch):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path))
    first = cached_lane_emden(2, 2.5, n=129)
    files = list(tmp_path.iterdir())
    assert len(files) == 1
    second = cached_lane_emden(2, 2.5, n=129)
    np.testing.assert_array_equal(first.u0, second.u0)
