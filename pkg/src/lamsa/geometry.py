"""Crank-slider kinematics and beam-length feasibility.

The slider carries one revolute joint of the beam; the other joint is fixed.
At slider height ``s`` the joints sit ``D(s) = sqrt(D1**2 + (H - s)**2)``
apart, so the beam (natural length ``L``) is compressed by ``L - D(s)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

MAX_PRECOMPRESSION = 0.30


@dataclass(frozen=True)
class LinkageGeometry:
    D1: float
    H: float
    crank_radius: float
    rod_length: float
    latch_fraction: float = 0.9
    limited_block: bool = True

    def __post_init__(self):
        if not self.D1 > 0:
            raise ConfigError("D1 must be positive")
        # H = 0 is the degenerate fixed-joint case, allowed for analysis
        if not self.H >= 0:
            raise ConfigError("H must be non-negative")
        if not 0 < self.crank_radius < self.rod_length:
            raise ConfigError("crank radius must satisfy 0 < r < rod length (lockup)")
        # 1.0 means the latch sits at TDC and never engages
        if not 0 < self.latch_fraction <= 1:
            raise ConfigError("latch_fraction must lie in (0, 1]")

    @property
    def D2(self):
        return float(np.hypot(self.D1, self.H))

    @property
    def latch_height(self):
        return self.latch_fraction * self.H


@dataclass(frozen=True)
class DesignFeasibility:
    L_min: float
    L_max: float
    feasible: bool
    violated_constraints: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    precompression: float = 0.0
    slenderness: float = 0.0

    @property
    def empty_interval(self):
        return self.L_min >= self.L_max


def slider_height(crank_angle, geom):
    """Slider height above BDC for a crank angle in radians (0 is TDC)."""
    r, l = geom.crank_radius, geom.rod_length
    if r >= l:
        raise ConfigError("crank-slider lockup: crank radius >= rod length")
    th = np.asarray(crank_angle, dtype=float)
    x = r * np.cos(th) + np.sqrt(l * l - (r * np.sin(th)) ** 2)
    s = geom.H * (x - (l - r)) / (2.0 * r)
    s = np.clip(s, 0.0, geom.H)
    return float(s) if s.ndim == 0 else s


def joint_distance(s, geom):
    s_arr = np.asarray(s, dtype=float)
    tol = 1e-9 * max(geom.H, 1.0)
    if np.any(s_arr < -tol) or np.any(s_arr > geom.H + tol):
        raise ValueError(f"slider height outside [0, {geom.H}]")
    d = np.sqrt(geom.D1 ** 2 + (geom.H - np.clip(s_arr, 0.0, geom.H)) ** 2)
    return float(d) if d.ndim == 0 else d


def compression(L, s, geom):
    """End shortening L - D(s); negative means the beam is stretched."""
    return L - joint_distance(s, geom)


def beam_length_bounds(geom):
    """Open interval of admissible beam lengths; may be empty."""
    return float(np.hypot(geom.D1, geom.H)), 10.0 * geom.D1 / 7.0


def validate_design(L, t, geom):
    if not (L > 0 and t > 0):
        raise ValueError("beam length and thickness must be positive")
    L_min, L_max = beam_length_bounds(geom)
    precomp = (L - geom.D1) / L
    checks = {
        "longer_than_widest_spacing": bool(L > geom.D2),
        "compression_limit": bool(0.7 * L < geom.D1),
        "length_band": bool(L_min < L < L_max),
        "precompression_cap": bool(precomp <= MAX_PRECOMPRESSION),
    }
    # the 30% cap follows from the compression limit since the tightest spacing is D1
    if checks["compression_limit"] and not checks["precompression_cap"]:
        raise AssertionError("compression limit holds but pre-compression exceeds 30%")
    violated = [k for k, ok in checks.items() if not ok]
    return DesignFeasibility(
        L_min=L_min,
        L_max=L_max,
        feasible=not violated,
        violated_constraints=violated,
        checks=checks,
        precompression=float(precomp),
        slenderness=float(L / t),
    )
