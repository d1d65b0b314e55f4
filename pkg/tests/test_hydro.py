import numpy as np
import pytest
from scipy.integrate import quad

from lamsa.config import default_config
from lamsa.hydro import (FinSpec, FluidEnv, SweepRow, added_mass_inertia, cycle_impulse,
                         drag_torque_coeff, fin_force, fin_inertia, fin_size_sweep,
                         normal_force_coeff)

WATER = FluidEnv()


def trapezoid(area=4000.0, **kw):
    return FinSpec.scaled(area, 60.0, 40.0, 80.0, **kw)


def rect(c=50.0, b=80.0, **kw):
    return FinSpec(area=c * b, root_chord=c, tip_chord=c, span=b, **kw)


def strip_force(omega, fin, rho_kg=1000.0):
    """Blade-element normal load by adaptive quadrature, in N."""
    rho = rho_kg * 1e-9  # kg/mm^3
    chord = lambda r: fin.root_chord + (fin.tip_chord - fin.root_chord) * r / fin.span
    val, _ = quad(lambda r: 0.5 * rho * fin.C_n * chord(r) * (omega * r) ** 2, 0.0, fin.span)
    # kg mm/s^2 -> N
    return np.sign(omega) * val * 1e-3


def test_trapezoid_consistency_enforced():
    with pytest.raises(Exception):
        FinSpec(area=4000.0, root_chord=60.0, tip_chord=40.0, span=70.0)
    f = trapezoid(2500.0)
    assert f.span * (f.root_chord + f.tip_chord) / 2 == pytest.approx(2500.0)
    assert f.root_chord / f.tip_chord == pytest.approx(1.5)


def test_zero_rate_gives_zero_force():
    assert np.all(fin_force(0.0, 10.0, trapezoid(), WATER) == 0.0)


def test_quadratic_and_odd_in_rate():
    fin = trapezoid()
    f1 = fin_force(3.0, 0.0, fin, WATER)
    f2 = fin_force(6.0, 0.0, fin, WATER)
    np.testing.assert_allclose(f2, 4.0 * f1, rtol=1e-12)
    np.testing.assert_allclose(fin_force(-3.0, 0.0, fin, WATER), -f1, rtol=1e-12)


def test_force_matches_adaptive_quadrature_oracle():
    for area in (1000.0, 2500.0, 4000.0, 4500.0):
        fin = trapezoid(area, C_n=1.3)
        for omega in (-7.0, 2.0, 11.0):
            fz = fin_force(omega, 0.0, fin, WATER)[2]
            assert fz == pytest.approx(strip_force(omega, fin), rel=1e-9)


def test_rectangle_closed_forms():
    c, b, w = 50.0, 80.0, 4.0
    fin = rect(c, b, C_n=0.9)
    rho = WATER.rho_mm
    force = 0.5 * rho * 0.9 * c * w ** 2 * b ** 3 / 3.0 * 1e-6
    assert fin_force(w, 0.0, fin, WATER)[2] == pytest.approx(force, rel=1e-6)
    # the b^4/4 integral is the hinge moment, not the force
    torque = 0.5 * rho * 0.9 * c * w ** 2 * b ** 4 / 4.0
    assert drag_torque_coeff(fin, WATER) * w ** 2 == pytest.approx(torque, rel=1e-6)
    added = 0.7 * rho * c ** 2 * b ** 3 / 3.0
    assert added_mass_inertia(rect(c, b, C_a=0.7), WATER) == pytest.approx(added, rel=1e-6)


def test_deflection_rotates_force_without_changing_magnitude():
    fin0 = trapezoid()
    fin30 = trapezoid(deflection_beta=30.0)
    f0 = fin_force(5.0, 0.0, fin0, WATER)
    f30 = fin_force(5.0, 0.0, fin30, WATER, tilt_axis=(0.0, 1.0, 0.0))
    assert np.linalg.norm(f30) == pytest.approx(np.linalg.norm(f0), rel=1e-12)
    assert f30[0] == 0.0 and f30[1] == pytest.approx(f0[2] * 0.5, rel=1e-12)
    assert f30[2] == pytest.approx(f0[2] * np.cos(np.deg2rad(30.0)), rel=1e-12)


def test_force_grows_with_area_at_fixed_rate():
    areas = np.linspace(1000.0, 4500.0, 10)
    fz = [fin_force(5.0, 0.0, trapezoid(a), WATER)[2] for a in areas]
    assert np.all(np.diff(fz) > 0)


def test_added_mass_scaling_oracle():
    areas = np.linspace(1000.0, 4500.0, 10)
    ia = np.array([added_mass_inertia(trapezoid(a), WATER) for a in areas])
    assert np.all(np.diff(ia) > 0)

    def oracle(fin):
        chord = lambda r: fin.root_chord + (fin.tip_chord - fin.root_chord) * r / fin.span
        val, _ = quad(lambda r: chord(r) ** 2 * r ** 2, 0.0, fin.span)
        return fin.C_a * WATER.rho_mm * val

    for a, v in zip(areas, ia):
        assert v == pytest.approx(oracle(trapezoid(a)), rel=1e-9)
    # five powers of length under self-similar scaling
    assert ia[-1] / ia[0] == pytest.approx((4500.0 / 1000.0) ** 2.5, rel=1e-9)


def test_added_mass_linear_in_coefficient():
    small = added_mass_inertia(trapezoid(C_a=1e-9), WATER)
    assert small == pytest.approx(1e-9 * added_mass_inertia(trapezoid(C_a=1.0), WATER), rel=1e-9)
    assert fin_inertia(trapezoid(C_a=1e-9), WATER) > 0


def test_normal_coefficient_units():
    fin = rect(50.0, 80.0, C_n=1.0)
    assert normal_force_coeff(fin, WATER) == pytest.approx(0.5 * 1e-3 * 50.0 * 80.0 ** 3 / 3)


class _Trace:
    def __init__(self, t, f):
        self.time, self.thrust = t, f


def test_cycle_impulse_examples():
    t = np.linspace(0.0, 1.0, 1001)
    assert cycle_impulse(_Trace(t, np.ones_like(t))) == pytest.approx(1.0, rel=1e-12)
    anti = np.sin(2 * np.pi * t)
    assert cycle_impulse(_Trace(t, anti)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        cycle_impulse(_Trace(np.array([0.0]), np.array([1.0])))


def test_single_area_sweep_and_row_failures():
    cfg = default_config()
    rows = fin_size_sweep([4000.0], cfg)
    assert len(rows) == 1 and isinstance(rows[0], SweepRow) and rows[0].status == "ok"
    # a fin too heavy to follow the strip fails in its own row only
    heavy = cfg.with_values(fin={"areal_density_g_per_mm2": 1e3})
    rows = fin_size_sweep([1000.0, 4000.0], heavy)
    assert len(rows) == 2


def test_sweep_rows_independent_of_job_count():
    cfg = default_config()
    areas = [1500.0, 3000.0, 4500.0]
    assert fin_size_sweep(areas, cfg, jobs=1) == fin_size_sweep(areas, cfg, jobs=2)
