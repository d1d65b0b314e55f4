"""Calibration against measured targets and design-space searches."""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize as sopt
from scipy.signal import find_peaks

from . import __version__
from . import beam as bm
from .actuator import ActuatorPhase, run_cycle
from .body import simulate_locomotion, steady_summary
from .errors import ConfigError, InfeasibleDesign, LamsaError
from .geometry import beam_length_bounds, joint_distance, validate_design
from .hydro import cycle_impulse, fin_size_sweep
from .parallel import pmap

TARGET_NAMES = ("peak_thrust", "impulse", "net_rise", "rise", "dip",
                "load_release_ratio", "optimum_area")
_TARGET_KEYS = {
    "peak_thrust": "peak_thrust_n", "impulse": "impulse_ns", "net_rise": "net_rise_mm",
    "rise": "rise_mm", "dip": "dip_mm", "load_release_ratio": "load_release_ratio",
    "optimum_area": "optimum_area_mm2",
}

# name -> (section, key, lower, upper, log-scaled)
PARAMETERS = {
    "c_b": ("beam", "stiffness_scale", 5.0, 150.0, True),
    "C_n": ("fin", "normal_coeff", 0.02, 5.0, True),
    "C_a": ("fin", "added_mass_coeff", 0.02, 5.0, True),
    "k_c": ("connector", "stiffness_nmm_per_rad", 20.0, 1.0e4, True),
    "c_c": ("connector", "damping_nmms_per_rad", 1e-3, 50.0, True),
    "buoyancy_offset": ("body", "buoyancy_offset_n", -1.0, 0.0, False),
    "body_Cd": ("body", "drag_coeff", 0.01, 20.0, True),
    "gamma1": ("beam", "torsion_gain", 0.0, 20.0, False),
    "gamma2": ("beam", "torsion_kill", 0.0, 20.0, False),
}
DYNAMIC_PARAMS = ("c_b", "C_n", "C_a", "k_c", "c_c", "buoyancy_offset", "body_Cd")
TORSION_PARAMS = ("gamma1", "gamma2")

# shape rules enforced as penalties while fitting
SHAPE_WEIGHT = 1.0
FAIL_COST = 1.0e3
AREA_STEP = 500.0
BODY_CYCLES = 15


@dataclass(frozen=True)
class CalibrationTargets:
    values: dict
    weights: dict
    tolerances: dict

    @classmethod
    def from_config(cls, config):
        sec = config["calibration_targets"]
        return cls(
            values={n: sec[_TARGET_KEYS[n]] for n in TARGET_NAMES},
            weights={n: sec[f"{n}_weight"] for n in TARGET_NAMES},
            tolerances={n: sec[f"{n}_tol"] for n in TARGET_NAMES},
        )

    def __post_init__(self):
        for n in TARGET_NAMES:
            if not self.values[n] > 0:
                raise ConfigError(f"target {n} must be positive")
            if self.weights[n] < 0:
                raise ConfigError(f"weight for {n} must be non-negative")

    def only(self, names):
        w = {n: (self.weights[n] if n in names else 0.0) for n in TARGET_NAMES}
        return CalibrationTargets(dict(self.values), w, dict(self.tolerances))

    def with_values(self, values):
        v = dict(self.values)
        v.update(values)
        return CalibrationTargets(v, dict(self.weights), dict(self.tolerances))


@dataclass
class CalibrationResult:
    params: dict
    residuals: dict
    metrics: dict
    objective: float
    converged: bool
    iterations: int
    evaluations: int
    seed: int
    config_hash: str
    torsion: dict = field(default_factory=dict)

    def to_json(self):
        d = asdict(self)
        d["tool_version"] = __version__
        return json.dumps(d, indent=2, sort_keys=True, default=_jsonable)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(type(v))


def load_calibration(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    unknown = set(data.get("params", {})) - set(PARAMETERS)
    if unknown:
        raise ConfigError(f"calibration file names unknown parameters: {sorted(unknown)}")
    return data


def apply_params(config, params):
    upd = {}
    for name, value in params.items():
        sec, key, lo, hi, _ = PARAMETERS[name]
        if not lo <= value <= hi:
            raise ConfigError(f"calibrated {name}={value} lies outside [{lo}, {hi}]")
        upd.setdefault(sec, {})[key] = float(value)
    return config.with_values(**upd)


def apply_calibration(config, path_or_data):
    data = load_calibration(path_or_data) if isinstance(path_or_data, str) else path_or_data
    return apply_params(config, data["params"])


def current_params(config, names=tuple(PARAMETERS)):
    return {n: float(config[PARAMETERS[n][0]][PARAMETERS[n][1]]) for n in names}


# thrust-profile shape

def return_stroke(trace):
    """Sample indices of the fin's return stroke, from the end of Release
    round the periodic cycle to the next snap."""
    rel = np.nonzero(trace.phase == ActuatorPhase.RELEASE)[0]
    if rel.size == 0:
        return np.arange(0)
    n = trace.phase.size
    return np.concatenate([np.arange(rel[-1] + 1, n), np.arange(0, rel[0])])


def thrust_shape(trace):
    """Structure of the thrust-time curve over one cycle."""
    f = trace.thrust
    peak = float(np.max(f))
    rel = trace.phase == ActuatorPhase.RELEASE
    ret = return_stroke(trace)
    peaks, _ = find_peaks(np.concatenate([[-np.inf], f, [-np.inf]]),
                          height=0.5 * peak, prominence=0.1 * peak)
    peaks = peaks - 1
    third = max(ret.size // 3, 1)
    return {
        "peak": peak,
        "dominant_peaks": int(peaks.size),
        "peak_in_release": bool(peaks.size >= 1 and np.all(rel[peaks])),
        "early_return_mean": float(np.mean(f[ret[:third]])) if ret.size else float("nan"),
        "late_return_max": float(np.max(f[ret[-third:]])) if ret.size else float("nan"),
    }


def shape_penalty(shape):
    if not np.isfinite(shape["early_return_mean"]):
        return 1.0
    peak = max(shape["peak"], 1e-9)
    pen = max(0.0, shape["early_return_mean"]) / peak
    # a small upward excursion, a few percent of the peak
    pen += max(0.0, 0.02 - shape["late_return_max"] / peak)
    pen += max(0.0, shape["late_return_max"] / peak - 0.3)
    pen += 0.0 if shape["dominant_peaks"] == 1 and shape["peak_in_release"] else 0.2
    return pen


SWEEP_GRID = np.arange(1000.0, 4501.0, 0.5 * AREA_STEP)


def grid_optimum_area(config, grid=SWEEP_GRID, impulse_at=None):
    """Impulse argmax over the area grid, refined by the parabola through the
    best point and its neighbours.  Also returns how far the grid departs
    from unimodal (0 when unimodal) and the impulse column."""
    imp = []
    for a in grid:
        if impulse_at is not None and np.isclose(a, impulse_at[0]):
            imp.append(impulse_at[1])
        else:
            imp.append(cycle_impulse(run_cycle(config, area=float(a))))
    imp = np.array(imp)
    i = int(np.argmax(imp))
    best = float(grid[i])
    if 0 < i < grid.size - 1:
        curv = imp[i - 1] - 2.0 * imp[i] + imp[i + 1]
        if curv < 0:
            best += (grid[1] - grid[0]) * (imp[i - 1] - imp[i + 1]) / (2.0 * curv)
    scale = max(abs(imp[i]), 1e-12)
    rise = np.diff(imp[: i + 1])
    fall = np.diff(imp[i:])
    defect = float((np.sum(np.maximum(-rise, 0.0)) + np.sum(np.maximum(fall, 0.0))) / scale)
    return best, defect, imp


def evaluate(config, need=TARGET_NAMES):
    """Model values for each calibration target under ``config``."""
    out = {}
    tr = run_cycle(config)
    out["peak_thrust"] = float(np.max(tr.thrust))
    out["impulse"] = cycle_impulse(tr)
    out["load_release_ratio"] = tr.ratio
    shape = thrust_shape(tr)
    out["shape_penalty"] = shape_penalty(shape)
    if "optimum_area" in need:
        area = config["fin"]["area_mm2"]
        out["optimum_area"], defect, _ = grid_optimum_area(config, impulse_at=(area, out["impulse"]))
        out["shape_penalty"] += defect
    if {"rise", "dip", "net_rise"} & set(need):
        traj = simulate_locomotion(BODY_CYCLES, None, config, traces={0.0: tr})
        s = steady_summary(traj)
        out["rise"], out["dip"], out["net_rise"] = s.rise, s.dip, s.net
    return out


def residuals(metrics, targets):
    return {n: (metrics[n] - targets.values[n]) / targets.values[n]
            for n in TARGET_NAMES if n in metrics}


def objective_value(metrics, targets, shape=True):
    r = residuals(metrics, targets)
    val = sum(targets.weights[n] * r[n] ** 2 for n in r)
    if shape:
        val += SHAPE_WEIGHT * metrics.get("shape_penalty", 0.0)
    return float(val)


class _Encoder:
    def __init__(self, names):
        self.names = list(names)

    def to_x(self, params):
        x = []
        for n in self.names:
            _, _, lo, hi, log = PARAMETERS[n]
            v = params[n]
            x.append(np.log(v) if log else v)
        return np.array(x)

    def to_params(self, x):
        out = {}
        for n, xi in zip(self.names, x):
            _, _, lo, hi, log = PARAMETERS[n]
            v = float(np.exp(xi)) if log else float(xi)
            out[n] = float(np.clip(v, lo, hi))
        return out


def _initial_simplex(x0, names, rng):
    """Deterministic simplex: one signed step per axis, signs from the seed."""
    n = len(x0)
    sim = np.tile(x0, (n + 1, 1))
    signs = rng.choice([-1.0, 1.0], size=n)
    for i, name in enumerate(names):
        log = PARAMETERS[name][4]
        step = 0.25 if log else 0.1 * (PARAMETERS[name][3] - PARAMETERS[name][2])
        sim[i + 1, i] += signs[i] * step
    return sim


def calibrate(targets, config, budget=None, names=DYNAMIC_PARAMS, start=None,
              fit_torsion_first=True, polish=True, jobs=1, shape=True, log=None):
    """Fit ``names`` so the model meets ``targets``; deterministic for a given seed."""
    geom, spec = config.geometry(), config.beam()
    rep = validate_design(spec.L, spec.t, geom)
    if not rep.feasible:
        raise InfeasibleDesign("base design violates the beam-length constraints",
                               rep.violated_constraints)
    budget = budget or config["calibration_targets"]["budget_evals"]
    rng = np.random.default_rng(config.seed)
    torsion = {}
    if fit_torsion_first and set(TORSION_PARAMS) & set(PARAMETERS):
        torsion = fit_torsion(config)
        config = apply_params(config, {k: torsion[k] for k in TORSION_PARAMS})
    names = [n for n in names if n not in TORSION_PARAMS]
    enc = _Encoder(names)
    p0 = current_params(config, names)
    if start:
        p0.update(start)
    need = tuple(n for n in TARGET_NAMES if targets.weights[n] > 0)
    memo = {}
    count = [0]

    def cost(x):
        params = enc.to_params(x)
        key = tuple(round(params[n], 12) for n in names)
        if key in memo:
            return memo[key][0]
        count[0] += 1
        try:
            m = evaluate(apply_params(config, params), need)
            val = objective_value(m, targets, shape)
        except LamsaError:
            m, val = {}, FAIL_COST
        memo[key] = (val, m)
        if log:
            log(count[0], val, params)
        return val

    x0 = enc.to_x(p0)
    res = sopt.minimize(
        cost, x0, method="Nelder-Mead",
        options={"initial_simplex": _initial_simplex(x0, names, rng),
                 "maxfev": int(0.8 * budget), "xatol": 1e-5, "fatol": 1e-10},
    )
    x = np.array(res.x)
    iterations = int(res.nit)
    if polish:
        x, extra = _coordinate_polish(cost, x, names, budget - count[0])
        iterations += extra
    best = enc.to_params(x)
    val = cost(x)
    metrics = memo[tuple(round(best[n], 12) for n in names)][1]
    converged = bool(res.success) and count[0] < budget
    params = dict(best)
    params.update({k: torsion[k] for k in TORSION_PARAMS if k in torsion})
    return CalibrationResult(
        params=params, residuals=residuals(metrics, targets) if metrics else {},
        metrics=metrics, objective=val, converged=converged, iterations=iterations,
        evaluations=count[0], seed=config.seed, config_hash=config.digest(),
        torsion=torsion,
    )


def _coordinate_polish(cost, x, names, budget, steps=(0.05, 0.01, 0.002)):
    x = np.array(x, dtype=float)
    fx = cost(x)
    used = 0
    sweeps = 0
    for h in steps:
        improved = True
        while improved and used < budget:
            improved = False
            sweeps += 1
            for i, name in enumerate(names):
                scale = 1.0 if PARAMETERS[name][4] else (PARAMETERS[name][3] - PARAMETERS[name][2])
                for sgn in (1.0, -1.0):
                    if used >= budget:
                        break
                    y = x.copy()
                    y[i] += sgn * h * scale
                    fy = cost(y)
                    used += 1
                    if fy < fx:
                        x, fx, improved = y, fy, True
                        break
    return x, sweeps


# torsion sign pattern

def torsion_effects(config, lengths=(38.0, 40.0, 42.0), phi=None):
    """Relative change of output force at the test torsion, per beam length."""
    phi = config["calibration_targets"]["torsion_test_deg"] if phi is None else phi
    geom = config.geometry()
    out = {}
    for L in lengths:
        spec = _with_length(config.beam(), L)
        delta = L - joint_distance(geom.H, geom)
        f0 = bm.output_force(delta, 0.0, spec)
        try:
            f1 = bm.output_force(delta, phi, spec)
        except ValueError:
            f1 = 0.0
        out[L] = f1 / f0 - 1.0
    return out


def _with_length(spec, L):
    from dataclasses import replace

    return replace(spec, L=float(L))


def fit_torsion(config, lengths=(38.0, 40.0, 42.0)):
    """Choose the torsion pair so the output-force changes at the test angle
    rise for the two shorter beams and fall for the longest, maximizing the
    smallest signed relative change while the nominal beam still tolerates
    ``min_kill_deg`` of torsion."""
    sec = config["calibration_targets"]
    kill_min = sec["min_kill_deg"]
    geom = config.geometry()
    L_nom = config["beam"]["length_mm"]
    want = np.array([1.0, 1.0, -1.0])

    def score(g1, g2):
        cfg = config.with_values(beam={"torsion_gain": g1, "torsion_kill": g2})
        spec = _with_length(cfg.beam(), L_nom)
        kill = bm.torsion_kill_angle(L_nom - joint_distance(geom.H, geom), spec)
        eff = torsion_effects(cfg, lengths)
        margin = float(np.min(want * np.array([eff[L] for L in lengths])))
        return margin, kill

    best = None
    grid = np.linspace(0.02, 3.0, 150)
    for g1 in grid:
        for g2 in grid:
            m, kill = score(g1, g2)
            if kill < kill_min:
                continue
            if best is None or m > best[0]:
                best = (m, g1, g2, kill)
    if best is None or best[0] <= 0:
        raise InfeasibleDesign("no torsion pair reproduces the output-force sign pattern")
    m, g1, g2, kill = best
    cfg = config.with_values(beam={"torsion_gain": float(g1), "torsion_kill": float(g2)})
    return {"gamma1": float(g1), "gamma2": float(g2), "min_margin": float(m),
            "kill_angle_deg": float(kill),
            "effects": {str(k): float(v) for k, v in torsion_effects(cfg, lengths).items()}}


# identifiability self-test

def identifiability_check(config, names=("c_b", "C_n", "k_c"),
                          target_names=("peak_thrust", "impulse", "load_release_ratio"),
                          perturb=1.5, budget=300):
    """Round trip: targets from known parameters, fit from a perturbed start.

    The default triple is chosen for separable sensitivities: the ratio
    follows the strip stiffness, the peak the connector stiffness and the
    impulse the normal-force coefficient.
    """
    truth = current_params(config, names)
    m = evaluate(config, need=("peak_thrust", "impulse", "load_release_ratio"))
    base = CalibrationTargets.from_config(config)
    tg = base.with_values({n: m[n] for n in target_names}).only(target_names)
    tg = CalibrationTargets(tg.values, {n: (1.0 if n in target_names else 0.0)
                                        for n in TARGET_NAMES}, tg.tolerances)
    start = {n: truth[n] * perturb for n in names}
    res = calibrate(tg, config, budget=budget, names=names, start=start,
                    fit_torsion_first=False, shape=False)
    err = {n: abs(res.params[n] / truth[n] - 1.0) for n in names}
    return truth, res, err


# design searches

def balance_objective(output_energy, torsion_margin):
    """Declared proxy for a balanced beam: released energy times the share of
    bistability that survives the test torsion."""
    return output_energy * max(torsion_margin, 0.0)


def optimize_beam_length(lengths, config):
    """Score candidate beam lengths by released energy and torsion robustness."""
    geom = config.geometry()
    L_min, L_max = beam_length_bounds(geom)
    phi = config["calibration_targets"]["torsion_test_deg"]
    lengths = [float(L) for L in lengths]
    if L_min >= L_max or not any(L_min < L < L_max for L in lengths):
        raise InfeasibleDesign(f"no candidate inside the admissible band ({L_min:.3f}, {L_max:.3f}) mm",
                               ["length_band"])
    rows = []
    for L in lengths:
        spec = _with_length(config.beam(), L)
        rep = validate_design(L, spec.t, geom)
        row = {"L": L, "feasible": rep.feasible, "violated": rep.violated_constraints}
        if rep.feasible:
            delta = L - joint_distance(geom.H, geom)
            d_eff = bm.effective_compression(delta, phi, spec)
            d_c = bm.critical_compression(phi, spec)
            margin = float(1.0 - d_eff / d_c)
            energy = float(bm.barrier_height(delta, phi, spec))
            row.update(
                trigger_force=float(bm.trigger_force(delta, 0.0, spec)),
                output_force=float(bm.output_force(delta, 0.0, spec)),
                output_force_torsion=(float(bm.output_force(delta, phi, spec))
                                      if bm.bistability_intact(delta, phi, spec) else 0.0),
                output_energy=energy, torsion_margin=margin,
                score=balance_objective(energy, margin),
            )
        rows.append(row)
    ok = [r for r in rows if r["feasible"]]
    best = max(ok, key=lambda r: r["score"])
    return best["L"], rows


def _unimodal(values):
    v = np.asarray(values, dtype=float)
    i = int(np.argmax(v))
    return bool(np.all(np.diff(v[: i + 1]) >= 0) and np.all(np.diff(v[i:]) <= 0))


def golden_maximize(fun, grid, values, tol=1.0):
    """Golden-section refinement around the best grid point."""
    grid = np.asarray(grid, dtype=float)
    i = int(np.argmax(values))
    if i == 0 or i == grid.size - 1:
        return float(grid[i]), float(values[i])
    brack = (grid[i - 1], grid[i], grid[i + 1])
    x = sopt.golden(lambda a: -fun(a), brack=brack, tol=tol / grid[i])
    fx = fun(x)
    if fx < values[i]:
        return float(grid[i]), float(values[i])
    return float(x), float(fx)


def optimize_fin_area(lo, hi, config, step=AREA_STEP, jobs=1, tol=1.0):
    """Impulse-maximizing fin area on [lo, hi]; returns (area, table, warning)."""
    f = config["fin"]
    if lo < f["min_area_mm2"] or hi > f["max_area_mm2"] or not lo < hi:
        raise ConfigError(f"area range must lie within [{f['min_area_mm2']}, {f['max_area_mm2']}]")
    grid = np.arange(lo, hi + 0.5 * step, step)
    table = fin_size_sweep(grid, config, jobs=jobs)
    imp = np.array([r.impulse for r in table])
    if not np.all(np.isfinite(imp)):
        raise LamsaError("fin-area sweep has failed rows")
    if not _unimodal(imp):
        return float(grid[int(np.argmax(imp))]), table, "impulse is not unimodal on the grid"

    def fun(a):
        a = float(np.clip(a, lo, hi))
        return cycle_impulse(run_cycle(config, area=a))

    best, _ = golden_maximize(fun, grid, imp, tol=tol)
    return best, table, None


def evaluate_many(configs, jobs=1):
    return pmap(evaluate, configs, jobs)
