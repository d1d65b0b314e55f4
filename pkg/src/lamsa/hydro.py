"""Quasi-steady blade-element loads on the trapezoidal fins.

Each fin is hinged at its root chord and sweeps about that hinge.  A strip
at radius r moves at omega * r and carries a normal load
0.5 * rho * C_n * c(r) * (omega r)**2, opposing the motion.  Spanwise
integrals are evaluated with Gauss-Legendre quadrature, which is exact for
the low-order polynomials that arise from a linear chord law.

Sign convention: positive omega is the power stroke (fin swinging down),
which pushes the robot up, so positive thrust points along +z.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError

# g/mm^3 per kg/m^3
RHO_SCALE = 1e-6
# N per g mm/s^2
FORCE_SCALE = 1e-6


@dataclass(frozen=True)
class FluidEnv:
    rho: float = 1000.0
    g: float = 9.81

    def __post_init__(self):
        if not self.rho > 0:
            raise ConfigError("fluid density must be positive")

    @property
    def rho_mm(self):
        return self.rho * RHO_SCALE


@dataclass(frozen=True)
class FinSpec:
    area: float
    root_chord: float
    tip_chord: float
    span: float
    deflection_beta: float = 0.0
    C_n: float = 1.0
    C_a: float = 0.5
    areal_density: float = 1.65e-3
    quad_points: int = 8

    def __post_init__(self):
        if min(self.root_chord, self.tip_chord, self.span) <= 0:
            raise ConfigError("fin chords and span must be positive")
        trap = self.span * (self.root_chord + self.tip_chord) / 2.0
        if abs(trap - self.area) > 1e-6 * self.area:
            raise ConfigError(f"fin area {self.area} does not match its trapezoid ({trap:.6g})")
        if not (self.C_n > 0 and self.C_a > 0):
            raise ConfigError("C_n and C_a must be positive")
        if self.areal_density < 0:
            raise ConfigError("areal density must be non-negative")

    @classmethod
    def scaled(cls, area, root_chord, tip_chord, span, **kw):
        """Self-similar copy of a reference trapezoid resized to ``area``."""
        if not area > 0:
            raise ConfigError("fin area must be positive")
        ref = span * (root_chord + tip_chord) / 2.0
        f = np.sqrt(area / ref)
        return cls(area=float(area), root_chord=root_chord * f, tip_chord=tip_chord * f,
                   span=span * f, **kw)

    def with_area(self, area):
        f = np.sqrt(area / self.area)
        return replace(self, area=float(area), root_chord=self.root_chord * f,
                       tip_chord=self.tip_chord * f, span=self.span * f)

    def chord(self, r):
        return self.root_chord + (self.tip_chord - self.root_chord) * np.asarray(r) / self.span


def span_integral(fin, chord_power, r_power):
    """Integral over the span of c(r)**chord_power * r**r_power dr."""
    x, w = np.polynomial.legendre.leggauss(fin.quad_points)
    r = 0.5 * fin.span * (x + 1.0)
    return 0.5 * fin.span * float(np.sum(w * fin.chord(r) ** chord_power * r ** r_power))


def normal_force_coeff(fin, fluid):
    """K in F_n = K omega|omega|, units g mm."""
    return 0.5 * fluid.rho_mm * fin.C_n * span_integral(fin, 1, 2)


def drag_torque_coeff(fin, fluid):
    """D in tau = D omega|omega| about the hinge, units g mm^2."""
    return 0.5 * fluid.rho_mm * fin.C_n * span_integral(fin, 1, 3)


def added_mass_inertia(fin, fluid):
    """Strip-theory added inertia about the hinge, g mm^2."""
    return fin.C_a * fluid.rho_mm * span_integral(fin, 2, 2)


def added_mass_force_coeff(fin, fluid):
    """A in F = A alpha for the acceleration reaction of the strip added mass, g mm."""
    return fin.C_a * fluid.rho_mm * span_integral(fin, 2, 1)


def structural_inertia(fin):
    return fin.areal_density * span_integral(fin, 1, 2)


def fin_inertia(fin, fluid):
    return structural_inertia(fin) + added_mass_inertia(fin, fluid)


def fin_force(omega, theta_fin, fin, fluid, tilt_axis=(1.0, 0.0, 0.0), alpha=0.0):
    """Body-frame force (N) from one fin.

    ``alpha`` (rad/s^2) adds the added-mass reaction to the quasi-steady
    load.  The vertical share is rotated by the deflection angle about the
    fin's spar, tipping it toward ``tilt_axis``.
    """
    omega = float(omega)
    fz = normal_force_coeff(fin, fluid) * omega * abs(omega)
    fz += added_mass_force_coeff(fin, fluid) * float(alpha)
    fz *= np.cos(np.deg2rad(theta_fin)) * FORCE_SCALE
    b = np.deg2rad(fin.deflection_beta)
    axis = np.asarray(tilt_axis, dtype=float)
    return fz * (np.sin(b) * axis + np.cos(b) * np.array([0.0, 0.0, 1.0]))


def cycle_impulse(trace):
    t = np.asarray(trace.time if hasattr(trace, "time") else trace[0], dtype=float)
    f = np.asarray(trace.thrust if hasattr(trace, "thrust") else trace[1], dtype=float)
    if t.size < 2:
        raise ValueError("cannot integrate an empty trace")
    return float(np.trapezoid(f, t))


@dataclass(frozen=True)
class SweepRow:
    area: float
    peak_thrust: float
    impulse: float
    status: str = "ok"


def fin_size_sweep(areas, config, jobs=1):
    """Run one cycle per fin area; failures are reported per row."""
    from .parallel import pmap

    return pmap(_sweep_row, [(float(a), config) for a in areas], jobs)


def _sweep_row(args):
    from .actuator import run_cycle
    from .errors import LamsaError

    area, config = args
    try:
        tr = run_cycle(config.with_values(fin={"area_mm2": area}))
    except LamsaError as exc:
        return SweepRow(area, float("nan"), float("nan"), f"failed: {exc}")
    return SweepRow(area, float(np.max(tr.thrust)), cycle_impulse(tr))
