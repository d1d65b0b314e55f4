"""Scenario configuration: a sectioned ``key = value`` text format.

Every physical quantity carries its unit in the key name (``length_mm``).
Unknown keys are rejected with their line number, and a key that only
differs from a known one by its unit suffix gets a dedicated message.
Missing keys take the documented defaults.  The canonical serialization
lists every section and key in schema order, so its SHA-256 digest
identifies the effective configuration.
"""

import hashlib
import re
from types import MappingProxyType

from .errors import ConfigError

# (default, kind).  Calibrated constants carry the shipped fit; see
# data/calibration.json for residuals and the seed that produced them.
SCHEMA = {
    "geometry": {
        # reconstructed so the length bounds bracket a 38-42 mm band
        "d1_mm": (35.5, "pos"),
        "h_mm": (13.0, "nonneg"),
        "crank_radius_mm": (6.5, "pos"),
        "rod_length_mm": (30.0, "pos"),
        "latch_fraction": (0.9, "latch"),
        "limited_block": (True, "bool"),
        "block_start_fraction": (0.5, "frac"),
        "block_zero_fraction": (0.08, "frac"),
        "preparation_fraction": (0.05, "frac"),
    },
    "beam": {
        "length_mm": (40.0, "pos"),
        "thickness_mm": (4.0, "pos"),
        "width_mm": (10.0, "pos"),
        # Gent's relation at Shore 60A
        "modulus_mpa": (3.605, "pos"),
        "stiffness_scale": (10.7485, "pos"),
        "torsion_gain": (0.88, "nonneg"),
        "torsion_kill": (0.68, "nonneg"),
        "critical_compression_ratio": (0.30, "frac"),
        "torsion_stiffness_nmm_per_rad2": (1.0, "nonneg"),
        "modal_mass_g": (2.5, "pos"),
        "damping_ns_per_mm": (0.011, "nonneg"),
    },
    "connector": {
        "lever_mm": (23.11, "pos"),
        "stiffness_nmm_per_rad": (59.8358, "pos"),
        "damping_nmms_per_rad": (0.608627, "nonneg"),
    },
    "drive": {
        "speed_rpm": (167.0, "pos"),
        "latch_stiffness_n_per_mm": (450.0, "pos"),
        "latch_contact_width_mm": (0.5, "pos"),
        "block_stiffness_n_per_mm": (200.0, "pos"),
        "warmup_cycles": (1, "nonnegint"),
        "phase_offset_fin0_deg": (0.0, "real"),
        "phase_offset_fin1_deg": (0.0, "real"),
        "phase_offset_fin2_deg": (0.0, "real"),
        "phase_offset_fin3_deg": (0.0, "real"),
    },
    "fin": {
        "area_mm2": (4000.0, "pos"),
        # reference trapezoid, rescaled self-similarly to area_mm2
        "root_chord_mm": (60.0, "pos"),
        "tip_chord_mm": (40.0, "pos"),
        "span_mm": (80.0, "pos"),
        "deflection_deg": (0.0, "angle"),
        "normal_coeff": (2.68139, "pos"),
        "added_mass_coeff": (0.125933, "pos"),
        "areal_density_g_per_mm2": (1.65e-3, "nonneg"),
        "gear_gain": (1.0, "nonneg"),
        "quadrature_points": (8, "posint"),
        "min_area_mm2": (500.0, "pos"),
        "max_area_mm2": (6000.0, "pos"),
    },
    "fluid": {
        "density_kg_per_m3": (1000.0, "pos"),
        "gravity_m_per_s2": (9.81, "pos"),
    },
    "body": {
        "mass_g": (350.0, "pos"),
        "drag_coeff": (0.729873, "pos"),
        "ref_area_mm2": (7850.0, "pos"),
        "buoyancy_offset_n": (-0.0714331, "real"),
        "yaw_inertia_g_mm2": (1.0e6, "pos"),
        "yaw_drag_nmms2": (50.0, "nonneg"),
        "arm_mm": (60.0, "pos"),
        "lateral_deflection_deg": (20.0, "angle"),
    },
    "sim": {
        "dt_s": (1e-4, "pos"),
        "cycles": (10, "posint"),
        "snap_tolerance_s": (1e-5, "pos"),
        "speed_scale": (1.0, "pos"),
    },
    "calibration_targets": {
        "peak_thrust_n": (0.528, "pos"),
        "impulse_ns": (0.147, "pos"),
        "net_rise_mm": (30.0, "pos"),
        "rise_mm": (40.0, "pos"),
        "dip_mm": (10.0, "pos"),
        "load_release_ratio": (10.0, "pos"),
        "optimum_area_mm2": (4000.0, "pos"),
        "peak_thrust_weight": (1.0, "nonneg"),
        "impulse_weight": (0.1, "nonneg"),
        "net_rise_weight": (1.0, "nonneg"),
        "rise_weight": (1.0, "nonneg"),
        "dip_weight": (1.0, "nonneg"),
        "load_release_ratio_weight": (1.0, "nonneg"),
        "optimum_area_weight": (1.0, "nonneg"),
        "peak_thrust_tol": (0.15, "pos"),
        "impulse_tol": (0.15, "pos"),
        "net_rise_tol": (0.20, "pos"),
        "rise_tol": (0.20, "pos"),
        "dip_tol": (0.40, "pos"),
        "load_release_ratio_tol": (0.20, "pos"),
        "optimum_area_tol": (0.125, "pos"),
        "budget_evals": (400, "posint"),
        "torsion_test_deg": (10.0, "pos"),
        "min_kill_deg": (45.0, "pos"),
    },
    "seed": {
        "value": (20240611, "nonnegint"),
    },
}

UNIT_SUFFIXES = (
    "_mm", "_mm2", "_deg", "_s", "_g", "_n", "_ns", "_mpa", "_rpm", "_kg_per_m3",
    "_m_per_s2", "_g_mm2", "_g_per_mm2", "_n_per_mm", "_ns_per_mm", "_nmm_per_rad",
    "_nmm_per_rad2", "_nmms_per_rad", "_nmms2",
)


def _base(key):
    for suf in sorted(UNIT_SUFFIXES, key=len, reverse=True):
        if key.endswith(suf):
            return key[: -len(suf)]
    return key


def _check(kind, value, where, line):
    def bad(msg):
        raise ConfigError(f"{where}: {msg} (got {value!r})", line)

    if kind == "bool":
        if not isinstance(value, bool):
            bad("expected true or false")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        bad("expected a number")
    if value != value or value in (float("inf"), float("-inf")):
        bad("must be finite")
    if kind in ("int", "posint", "nonnegint"):
        if float(value) != int(value):
            bad("expected an integer")
        value = int(value)
        if kind == "posint" and value <= 0:
            bad("must be a positive integer")
        if kind == "nonnegint" and value < 0:
            bad("must be a non-negative integer")
        return value
    value = float(value)
    if kind == "pos" and not value > 0:
        bad("must be positive")
    if kind == "nonneg" and value < 0:
        bad("must be non-negative")
    if kind == "frac" and not 0 < value < 1:
        bad("must lie strictly between 0 and 1")
    if kind == "latch" and not 0 < value <= 1:
        bad("must lie in (0, 1]")
    if kind == "angle" and not -90 < value < 90:
        bad("must lie in (-90, 90) degrees")
    return value


def _parse_value(text, line):
    t = text.strip()
    if t in ("true", "false"):
        return t == "true"
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "\"'":
        return t[1:-1]
    try:
        return int(t) if re.fullmatch(r"[+-]?\d+", t) else float(t)
    except ValueError:
        raise ConfigError(f"cannot parse value {t!r}", line) from None


def _strip_comment(raw):
    out, quote = [], None
    for ch in raw:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch in "#;":
            break
        out.append(ch)
    return "".join(out).strip()


class ScenarioConfig:
    """Validated, immutable scenario.  Use :func:`parse_config` to read one."""

    def __init__(self, values=None, lines=None):
        values = values or {}
        lines = lines or {}
        merged, given = {}, set()
        for sec, keys in SCHEMA.items():
            merged[sec] = {}
            for key, (default, kind) in keys.items():
                if key in values.get(sec, {}):
                    given.add((sec, key))
                    v = values[sec][key]
                else:
                    v = default
                merged[sec][key] = _check(kind, v, f"{sec}.{key}", lines.get((sec, key)))
        for sec, keys in values.items():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]", lines.get((sec, None)))
            for key in keys:
                if key not in SCHEMA[sec]:
                    raise ConfigError(_unknown_key_message(sec, key), lines.get((sec, key)))
        self._values = MappingProxyType({s: MappingProxyType(d) for s, d in merged.items()})
        self._given = frozenset(given)
        self._lines = dict(lines)
        self._validate()

    def __getitem__(self, section):
        return self._values[section]

    def __eq__(self, other):
        return isinstance(other, ScenarioConfig) and self.canonical() == other.canonical()

    def __hash__(self):
        return hash(self.canonical())

    def __getstate__(self):
        return {"values": self.as_dict(), "lines": self._lines}

    def __setstate__(self, state):
        self.__init__(state["values"], state["lines"])

    def as_dict(self):
        return {s: dict(d) for s, d in self._values.items()}

    @property
    def defaults_used(self):
        return [(s, k) for s in SCHEMA for k in SCHEMA[s] if (s, k) not in self._given]

    def with_values(self, **sections):
        d = self.as_dict()
        for sec, upd in sections.items():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]")
            for k in upd:
                if k not in SCHEMA[sec]:
                    raise ConfigError(_unknown_key_message(sec, k))
            d[sec].update(upd)
        return ScenarioConfig(d)

    def canonical(self):
        out = []
        for sec, keys in SCHEMA.items():
            out.append(f"[{sec}]")
            for key in keys:
                out.append(f"{key} = {_format(self._values[sec][key])}")
            out.append("")
        return "\n".join(out)

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    # domain objects

    def geometry(self):
        from .geometry import LinkageGeometry

        g = self["geometry"]
        return LinkageGeometry(
            D1=g["d1_mm"], H=g["h_mm"], crank_radius=g["crank_radius_mm"],
            rod_length=g["rod_length_mm"], latch_fraction=g["latch_fraction"],
            limited_block=g["limited_block"],
        )

    def beam(self):
        from .beam import BeamSpec

        b = self["beam"]
        return BeamSpec(
            L=b["length_mm"], t=b["thickness_mm"], w=b["width_mm"], E_mod=b["modulus_mpa"],
            stiffness_scale=b["stiffness_scale"], torsion_gain=b["torsion_gain"],
            torsion_kill=b["torsion_kill"],
            critical_compression_ratio=b["critical_compression_ratio"],
            torsion_stiffness=b["torsion_stiffness_nmm_per_rad2"],
        )

    def fin(self, deflection=None):
        from .hydro import FinSpec

        f = self["fin"]
        beta = f["deflection_deg"] if deflection is None else deflection
        return FinSpec.scaled(
            f["area_mm2"], f["root_chord_mm"], f["tip_chord_mm"], f["span_mm"],
            deflection_beta=float(beta), C_n=f["normal_coeff"], C_a=f["added_mass_coeff"],
            areal_density=f["areal_density_g_per_mm2"], quad_points=f["quadrature_points"],
        )

    def fluid(self):
        from .hydro import FluidEnv

        return FluidEnv(rho=self["fluid"]["density_kg_per_m3"], g=self["fluid"]["gravity_m_per_s2"])

    def body(self):
        from .body import RobotBody

        b = self["body"]
        return RobotBody(
            mass=b["mass_g"], drag_Cd=b["drag_coeff"], ref_area=b["ref_area_mm2"],
            buoyancy_offset=b["buoyancy_offset_n"], yaw_inertia=b["yaw_inertia_g_mm2"],
            yaw_drag=b["yaw_drag_nmms2"], arm=b["arm_mm"],
        )

    @property
    def period(self):
        return 60.0 / (self["drive"]["speed_rpm"] * self["sim"]["speed_scale"])

    @property
    def seed(self):
        return self["seed"]["value"]

    def _validate(self):
        g = self["geometry"]
        if not g["crank_radius_mm"] < g["rod_length_mm"]:
            raise ConfigError("geometry.crank_radius_mm must be below rod_length_mm (lockup)",
                              self._lines.get(("geometry", "crank_radius_mm")))
        if not g["block_zero_fraction"] < g["block_start_fraction"]:
            raise ConfigError("geometry.block_zero_fraction must be below block_start_fraction",
                              self._lines.get(("geometry", "block_zero_fraction")))
        b = self["beam"]
        if b["length_mm"] / b["thickness_mm"] < 5:
            raise ConfigError("beam slenderness length/thickness must be at least 5",
                              self._lines.get(("beam", "length_mm")))
        f = self["fin"]
        if not f["min_area_mm2"] < f["max_area_mm2"]:
            raise ConfigError("fin.min_area_mm2 must be below fin.max_area_mm2",
                              self._lines.get(("fin", "min_area_mm2")))
        if not f["min_area_mm2"] <= f["area_mm2"] <= f["max_area_mm2"]:
            raise ConfigError("fin.area_mm2 outside the model validity window",
                              self._lines.get(("fin", "area_mm2")))


def _unknown_key_message(sec, key):
    base = _base(key)
    for known in SCHEMA[sec]:
        if _base(known) == base and known != key:
            return f"unit-suffix mismatch: {sec}.{key} should be {sec}.{known}"
    return f"unknown key {sec}.{key}"


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def parse_text(text):
    values, lines, sec = {}, {}, None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_][\w]*)\s*\]", line)
        if m:
            sec = m.group(1)
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]", n)
            values.setdefault(sec, {})
            lines[(sec, None)] = n
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", n)
        key, val = (p.strip() for p in line.split("=", 1))
        if "." in key:
            s2, key = key.split(".", 1)
            target = s2
        else:
            target = sec
        if target is None:
            raise ConfigError(f"key {key!r} appears before any section header", n)
        if target not in SCHEMA:
            raise ConfigError(f"unknown section [{target}]", n)
        if key not in SCHEMA[target]:
            raise ConfigError(_unknown_key_message(target, key), n)
        if key in values.get(target, {}):
            raise ConfigError(f"duplicate key {target}.{key}", n)
        values.setdefault(target, {})[key] = _parse_value(val, n)
        lines[(target, key)] = n
    return ScenarioConfig(values, lines)


def parse_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read())


def default_config():
    return ScenarioConfig()
