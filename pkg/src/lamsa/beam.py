"""Reduced-order double-well model of the pre-compressed silicone strip.

A single transverse modal coordinate ``q`` (mm) carries the first buckling
mode.  The strip's elastic energy is the quartic

    U(q) = k_b / (4 qbar**2) * (q**2 - qbar**2)**2 + k_t * phi**2 / 2

with wells at ``+-qbar`` set by end shortening.  Torsion enters in two ways:
it stretches the effective compression, and it lowers the compression at
which the strip stops being bistable.  The wells are sized by the bistable
compression, which is the effective compression scaled by the remaining
stability margin, so they shrink continuously to zero at the kill boundary.

Units: mm, N, mJ (= N mm).  Torsion angles are given in degrees.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError

SQRT27 = 3.0 * np.sqrt(3.0)


class Branch(str, Enum):
    DOWN = "DownWell"
    UP = "UpWell"
    MONOSTABLE = "Monostable"


@dataclass(frozen=True)
class BeamSpec:
    L: float
    t: float = 4.0
    w: float = 10.0
    E_mod: float = 3.605
    stiffness_scale: float = 1.0
    torsion_gain: float = 0.0
    torsion_kill: float = 0.0
    critical_compression_ratio: float = 0.30
    torsion_stiffness: float = 0.0

    def __post_init__(self):
        for name in ("L", "t", "w", "E_mod", "stiffness_scale", "critical_compression_ratio"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"beam {name} must be positive")
        if self.L / self.t < 5:
            raise ConfigError("beam slenderness L/t below 5 is outside the model's range")
        if self.torsion_gain < 0 or self.torsion_kill < 0:
            raise ConfigError("torsion coefficients must be non-negative")
        if self.torsion_stiffness < 0:
            raise ConfigError("torsion stiffness must be non-negative")

    @property
    def second_moment(self):
        return self.w * self.t ** 3 / 12.0

    @property
    def k_b(self):
        """Modal stiffness in N/mm."""
        return self.stiffness_scale * self.E_mod * self.second_moment * np.pi ** 4 / self.L ** 3

    @property
    def delta_crit(self):
        return self.critical_compression_ratio * self.L


@dataclass(frozen=True)
class BeamState:
    q: float
    delta: float
    phi: float = 0.0
    branch: Branch = Branch.DOWN


def _rad(phi_deg):
    return np.deg2rad(np.asarray(phi_deg, dtype=float))


def effective_compression(delta, phi, spec):
    p = _rad(phi)
    return np.asarray(delta, dtype=float) * (1.0 + spec.torsion_gain * p * p)


def critical_compression(phi, spec):
    p = _rad(phi)
    return spec.delta_crit * (1.0 - spec.torsion_kill * p * p)


def bistability_intact(delta, phi, spec):
    d_eff = effective_compression(delta, phi, spec)
    d_c = critical_compression(phi, spec)
    ok = (d_eff > 0) & (d_eff < d_c)
    return bool(ok) if np.ndim(ok) == 0 else ok


def bistable_compression(delta, phi, spec):
    """Compression that sizes the wells; zero wherever bistability is lost."""
    delta = np.asarray(delta, dtype=float)
    d_eff = effective_compression(delta, phi, spec)
    d_c = critical_compression(phi, spec)
    with np.errstate(divide="ignore", invalid="ignore"):
        margin = 1.0 - (d_eff / d_c) ** 2
        margin0 = 1.0 - (delta / spec.delta_crit) ** 2
        out = np.where(bistability_intact(delta, phi, spec) & (margin0 > 0),
                       d_eff * margin / margin0, 0.0)
    return float(out) if out.ndim == 0 else out


def bistable_compression_slope(delta, phi, spec):
    """d(bistable compression)/d(delta), used for slider work bookkeeping."""
    delta = np.asarray(delta, dtype=float)
    p = _rad(phi)
    a = 1.0 + spec.torsion_gain * p * p
    d_c = critical_compression(phi, spec)
    d_c0 = spec.delta_crit
    d_e = a * delta
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = 1.0 - (d_e / d_c) ** 2
        mu0 = 1.0 - (delta / d_c0) ** 2
        dmu = -2.0 * d_e / d_c ** 2
        dmu0 = -2.0 * delta / d_c0 ** 2
        slope = a * (mu + d_e * dmu) / mu0 - d_e * mu * dmu0 / mu0 ** 2
        out = np.where(bistability_intact(delta, phi, spec) & (mu0 > 0), slope, 0.0)
    return float(out) if out.ndim == 0 else out


def well_amplitude(delta, spec, phi=0.0):
    """Well position qbar = (2/pi) sqrt(L * delta_b), zero when monostable."""
    d_b = np.asarray(bistable_compression(delta, phi, spec))
    out = (2.0 / np.pi) * np.sqrt(spec.L * np.maximum(d_b, 0.0))
    return float(out) if out.ndim == 0 else out


def potential_energy(q, delta, phi, spec):
    q = np.asarray(q, dtype=float)
    qb = np.asarray(well_amplitude(delta, spec, phi))
    k = spec.k_b
    tors = 0.5 * spec.torsion_stiffness * _rad(phi) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        quartic = k / (4.0 * qb * qb) * (q * q - qb * qb) ** 2
    u = np.where(qb > 0, quartic, 0.5 * k * q * q) + tors
    return float(u) if u.ndim == 0 else u


def restoring_force(q, delta, phi, spec):
    """Generalized force -dU/dq in N."""
    q = np.asarray(q, dtype=float)
    qb = np.asarray(well_amplitude(delta, spec, phi))
    k = spec.k_b
    with np.errstate(divide="ignore", invalid="ignore"):
        cubic = -k * q * (q * q - qb * qb) / (qb * qb)
    f = np.where(qb > 0, cubic, -k * q)
    return float(f) if f.ndim == 0 else f


def compression_force(q, delta, phi, spec):
    """dU/d(delta) in N: the load the joints carry per unit end shortening."""
    q = np.asarray(q, dtype=float)
    qb = np.asarray(well_amplitude(delta, spec, phi))
    slope = np.asarray(bistable_compression_slope(delta, phi, spec))
    with np.errstate(divide="ignore", invalid="ignore"):
        du_ddb = spec.k_b * spec.L / np.pi ** 2 * (1.0 - (q / qb) ** 4)
    f = np.where(qb > 0, du_ddb * slope, 0.0)
    return float(f) if f.ndim == 0 else f


def barrier_height(delta, phi, spec):
    qb = well_amplitude(delta, spec, phi)
    return spec.k_b * qb * qb / 4.0


def _peak_force(delta, phi, spec, message):
    qb = well_amplitude(delta, spec, phi)
    if np.any(np.asarray(qb) <= 0):
        raise ValueError(message)
    return 2.0 * spec.k_b * qb / SQRT27


def trigger_force(delta, phi, spec):
    """Largest force the barrier exerts against a quasi-static crossing."""
    return _peak_force(delta, phi, spec, "no barrier to trigger")


def output_force(delta, phi, spec):
    """Largest force delivered on the far side of the barrier."""
    return _peak_force(delta, phi, spec, "bistability lost")


def branch_of(q, delta, phi, spec):
    if well_amplitude(delta, spec, phi) <= 0:
        return Branch.MONOSTABLE
    return Branch.DOWN if q < 0 else Branch.UP


def torsion_kill_angle(delta, spec):
    """Smallest torsion angle (deg) at which bistability is lost, or inf."""
    r = delta / spec.delta_crit
    if r <= 0:
        return 0.0
    if r >= 1:
        return 0.0
    denom = r * spec.torsion_gain + spec.torsion_kill
    if denom <= 0:
        return float("inf")
    return float(np.rad2deg(np.sqrt((1.0 - r) / denom)))
