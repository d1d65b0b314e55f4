import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from lamsa.config import default_config
from lamsa.errors import ConfigError
from lamsa.geometry import (LinkageGeometry, beam_length_bounds, joint_distance,
                            slider_height, validate_design)


def geom(D1=35.0, H=20.0, r=10.0, l=40.0, **kw):
    return LinkageGeometry(D1=D1, H=H, crank_radius=r, rod_length=l, **kw)


def closure_position(theta, r, l):
    """Slider position found by solving the rod-length closure numerically."""
    pin = np.array([r * np.sin(theta), r * np.cos(theta)])
    return brentq(lambda y: np.hypot(pin[0], y - pin[1]) - l, pin[1], pin[1] + 2 * l)


def test_dead_centers():
    g = geom()
    assert slider_height(0.0, g) == pytest.approx(g.H)
    assert slider_height(np.pi, g) == pytest.approx(0.0, abs=1e-12)


def test_quarter_turn_matches_closure_oracle():
    g = geom(H=20.0, r=10.0, l=40.0)
    raw = closure_position(np.pi / 2, 10.0, 40.0)
    assert raw == pytest.approx(38.72983346, rel=1e-9)
    expected = 20.0 * (raw - 30.0) / 20.0
    assert slider_height(np.pi / 2, g) == pytest.approx(expected, rel=1e-9)
    assert expected == pytest.approx(8.72983346, rel=1e-8)


def test_slider_table_at_one_degree():
    g = geom(H=13.0, r=6.5, l=30.0)
    th = np.deg2rad(np.arange(0, 361))
    table = np.array([13.0 * (closure_position(a, 6.5, 30.0) - 23.5) / 13.0 for a in th])
    np.testing.assert_allclose(slider_height(th, g), table, rtol=0, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(-20, 20))
def test_slider_periodic_and_bounded(theta):
    g = geom()
    s = slider_height(theta, g)
    assert 0.0 <= s <= g.H
    assert slider_height(theta + 2 * np.pi, g) == pytest.approx(s, abs=1e-9)


def test_lockup_rejected():
    with pytest.raises(ConfigError):
        geom(r=40.0, l=40.0)


def test_joint_distance_examples():
    g = geom(D1=30.0, H=40.0)
    assert joint_distance(0.0, g) == pytest.approx(50.0)
    assert joint_distance(40.0, g) == pytest.approx(30.0)
    g2 = geom(D1=35.0, H=20.0)
    fixed = np.array([0.0, 0.0])
    moving = np.array([35.0, 20.0 - 10.0])
    assert joint_distance(10.0, g2) == pytest.approx(np.linalg.norm(moving - fixed))
    assert joint_distance(10.0, g2) == pytest.approx(36.40054945, rel=1e-9)


def test_joint_distance_rejects_out_of_range():
    with pytest.raises(ValueError):
        joint_distance(-1.0, geom())
    with pytest.raises(ValueError):
        joint_distance(25.0, geom())


def test_joint_distance_monotone():
    g = geom()
    s = np.linspace(0, g.H, 200)
    assert np.all(np.diff(joint_distance(s, g)) < 0)
    flat = geom(H=0.0)
    assert joint_distance(0.0, flat) == pytest.approx(flat.D1)


def test_bounds_examples():
    assert beam_length_bounds(geom(D1=35.0, H=0.0)) == pytest.approx((35.0, 50.0))
    lo, hi = beam_length_bounds(geom(D1=35.0, H=20.0))
    assert lo == pytest.approx(40.31128874, rel=1e-9)
    assert hi == pytest.approx(50.0)
    lo, hi = beam_length_bounds(geom(D1=10.0, H=20.0))
    assert lo == pytest.approx(22.36067977, rel=1e-9)
    assert hi == pytest.approx(14.28571429, rel=1e-9)
    assert not validate_design(18.0, 2.0, geom(D1=10.0, H=20.0)).feasible


def brute_feasible(L, g):
    # length against the widest spacing (BDC), compression limit at the tightest (TDC)
    return L > joint_distance(0.0, g) and 0.7 * L < joint_distance(g.H, g)


def test_bounds_agree_with_brute_force_scan():
    rng = np.random.default_rng(7)
    disagreements = 0
    for _ in range(1000):
        g = geom(D1=rng.uniform(5, 60), H=rng.uniform(0, 40), r=5.0, l=20.0)
        lo, hi = beam_length_bounds(g)
        grid = np.arange(0.01, 120.0, 0.01)
        brute = np.array([brute_feasible(L, g) for L in grid[::50]])
        fast = (grid[::50] > lo) & (grid[::50] < hi)
        disagreements += int(np.sum(brute != fast))
        ok = grid[(grid > joint_distance(0.0, g)) & (0.7 * grid < g.D1)]
        if ok.size:
            assert ok[0] - lo <= 0.01 + 1e-9 and hi - ok[-1] <= 0.01 + 1e-9
        else:
            assert hi - lo < 0.02
    assert disagreements == 0


def test_default_geometry_brackets_band():
    cfg = default_config()
    g = cfg.geometry()
    lo, hi = beam_length_bounds(g)
    assert lo < 38.0 and hi > 42.0
    rep = validate_design(40.0, 4.0, g)
    assert rep.feasible and rep.slenderness == pytest.approx(10.0)
    for L in (38.0, 40.0, 42.0):
        assert validate_design(L, 4.0, g).feasible


def test_boundary_cases():
    g = geom()
    rep = validate_design(g.D2, 4.0, g)
    assert not rep.feasible and "longer_than_widest_spacing" in rep.violated_constraints
    flat = geom(D1=35.0, H=0.0)
    rep = validate_design(1.5 * 35.0, 4.0, flat)
    assert not rep.feasible
    assert {"compression_limit", "length_band", "precompression_cap"} <= set(rep.violated_constraints)


@settings(max_examples=200, deadline=None)
@given(st.floats(5, 60), st.floats(0, 40), st.floats(1, 120))
def test_feasible_iff_inside_bounds(D1, H, L):
    g = geom(D1=D1, H=H, r=5.0, l=20.0)
    lo, hi = beam_length_bounds(g)
    rep = validate_design(L, 4.0, g)
    assert rep.feasible == (lo < L < hi and rep.precompression <= 0.30)
    if rep.checks["compression_limit"]:
        assert rep.checks["precompression_cap"]
