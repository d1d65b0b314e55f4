"""Command-line entry points.

Each invocation writes into a fresh run directory named by timestamp and
config-hash prefix: the effective config, a run log listing the defaults
that were filled in, CSV tables and a JSON summary.  Failures leave an
``error.json`` and exit with 2 (config), 3 (simulation) or 4 (infeasible).
"""

import argparse
import datetime as _dt
import json
import os
import sys
from importlib import resources

import numpy as np

from . import __version__
from .errors import ConfigError, InfeasibleDesign, LamsaError

SIG = 9


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.{SIG}g}"
    return str(v)


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return float(f"{v:.{SIG}g}") if np.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


class RunDir:
    """Output directory for one invocation; writes are serialized through it."""

    def __init__(self, root, config, command):
        self.config = config
        self.digest = config.digest()
        stamp = _dt.datetime.now().strftime("%Y%m%dT%H%M%S")
        base = os.path.join(root, f"{stamp}-{self.digest[:10]}")
        path, k = base, 1
        while os.path.exists(path):
            path = f"{base}-{k}"
            k += 1
        try:
            os.makedirs(path)
        except OSError as exc:
            raise LamsaError(f"cannot create run directory {path}: {exc}") from None
        self.path = path
        self.header = f"# lamsa {__version__} config_sha256={self.digest}"
        self.write_text("config.ini", config.canonical())
        used = ", ".join(f"{s}.{k}" for s, k in config.defaults_used) or "none"
        self.write_text("run.log", f"{self.header}\ncommand: {command}\ndefaults used: {used}\n")

    def file(self, name):
        return os.path.join(self.path, name)

    def write_text(self, name, text):
        with open(self.file(name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")

    def write_csv(self, name, columns, rows):
        lines = [self.header, ",".join(columns)]
        lines += [",".join(_fmt(v) for v in row) for row in rows]
        self.write_text(name, "\n".join(lines))

    def write_json(self, name, data):
        data = dict(data)
        data["config_sha256"] = self.digest
        data["tool_version"] = __version__
        self.write_text(name, json.dumps(_plain(data), indent=2, sort_keys=True))


def _range(text, what):
    """``lo:hi:step`` or a comma list."""
    try:
        if ":" in text:
            lo, hi, step = (float(x) for x in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            return list(np.arange(lo, hi + 0.5 * step, step))
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"malformed {what} {text!r}; use lo:hi:step or a comma list") from None


def _load_config(args):
    from .config import default_config, parse_config
    from .optimize import apply_calibration

    cfg = parse_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg = cfg.with_values(seed={"value": args.seed})
    if args.calibration:
        cfg = apply_calibration(cfg, args.calibration)
    return cfg


# subcommands

def cmd_validate(cfg, run, args):
    from .geometry import beam_length_bounds, validate_design

    geom, b = cfg.geometry(), cfg["beam"]
    rep = validate_design(b["length_mm"], b["thickness_mm"], geom)
    lo, hi = beam_length_bounds(geom)
    out = {
        "feasible": rep.feasible, "checks": rep.checks,
        "violated": rep.violated_constraints, "length_bounds_mm": [lo, hi],
        "precompression": rep.precompression, "slenderness": rep.slenderness,
    }
    run.write_json("validate.json", out)
    print(json.dumps(_plain(out), sort_keys=True))
    if not rep.feasible:
        raise InfeasibleDesign("design violates the beam-length constraints",
                               rep.violated_constraints)


def cmd_simulate(cfg, run, args):
    from .actuator import run_cycle
    from .body import per_cycle_summary, simulate_locomotion

    tr = run_cycle(cfg)
    rows = zip(tr.time, tr.slider_s, tr.q, tr.fin_angle, tr.latch_force, tr.phase, tr.thrust)
    run.write_csv("cycle.csv", ["t_s", "slider_mm", "q_mm", "fin_deg", "latch_n", "phase",
                                "thrust_n"], rows)
    summary = {"cycle": tr.summary()}
    cycles = args.cycles or cfg["sim"]["cycles"]
    if not args.cycle_only:
        beta = args.deflection if args.deflection is not None else [0.0] * 4
        traj = simulate_locomotion(cycles, beta, cfg, traces={0.0: tr})
        _write_trajectory(run, traj)
        per, partial = per_cycle_summary(traj)
        summary["per_cycle"] = [_cycle_dict(c) for c in per]
        summary["partial_cycle_excluded"] = partial
        summary["final_state"] = traj.state().__dict__
    run.write_json("summary.json", summary)
    print(json.dumps(_plain(summary["cycle"]), sort_keys=True))


def _cycle_dict(c):
    return {"index": c.index, "t_start_s": c.t_start, "rise_mm": c.rise, "dip_mm": c.dip,
            "net_mm": c.net, "dx_mm": c.dx, "dy_mm": c.dy, "horizontal_mm": c.horizontal}


def _write_trajectory(run, traj, stride=10):
    sl = slice(None, None, stride)
    rows = zip(traj.time[sl], traj.x[sl], traj.y[sl], traj.z[sl], traj.yaw[sl],
               traj.pitch[sl], traj.phase[sl])
    run.write_csv("trajectory.csv", ["t_s", "x_mm", "y_mm", "z_mm", "yaw_deg", "pitch_deg",
                                     "phase"], rows)


def cmd_sweep(cfg, run, args):
    from .hydro import fin_size_sweep

    areas = _range(args.areas, "area grid")
    rows = fin_size_sweep(areas, cfg, jobs=args.jobs)
    run.write_csv("sweep.csv", ["area_mm2", "peak_thrust_n", "impulse_ns", "status"],
                  [(r.area, r.peak_thrust, r.impulse, r.status) for r in rows])
    ok = [r for r in rows if r.status == "ok"]
    best = max(ok, key=lambda r: r.impulse) if ok else None
    out = {"rows": len(rows), "failed": len(rows) - len(ok),
           "argmax_impulse_area_mm2": best.area if best else None}
    run.write_json("summary.json", out)
    print(json.dumps(_plain(out), sort_keys=True))


def default_steering_script():
    return resources.files("lamsa").joinpath("data/steering_default.txt").read_text()


def cmd_steer(cfg, run, args):
    from .body import parse_steering, per_cycle_summary, steering_scenario

    if args.script:
        with open(args.script, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = default_steering_script()
    cmds = parse_steering(text)
    run.write_text("steering.txt", text)
    traj = steering_scenario(cmds, cfg, duration=args.duration)
    _write_trajectory(run, traj, stride=100)
    per, partial = per_cycle_summary(traj)
    out = {"commands": [list(c) for c in cmds], "duration_s": float(traj.time[-1]),
           "final_state": traj.state().__dict__, "per_cycle": [_cycle_dict(c) for c in per],
           "partial_cycle_excluded": partial}
    run.write_json("summary.json", out)
    print(json.dumps(_plain(out["final_state"]), sort_keys=True))


def cmd_calibrate(cfg, run, args):
    from .optimize import CalibrationTargets, calibrate

    targets = CalibrationTargets.from_config(cfg)
    res = calibrate(targets, cfg, budget=args.budget, jobs=args.jobs)
    res.save(run.file("calibration.json"))
    print(json.dumps(_plain({"objective": res.objective, "converged": res.converged,
                             "params": res.params}), sort_keys=True))


def cmd_optimize(cfg, run, args):
    from .optimize import optimize_beam_length, optimize_fin_area

    if args.search == "beam-length":
        best, rows = optimize_beam_length(_range(args.lengths, "length grid"), cfg)
        run.write_csv("beam_length.csv",
                      ["length_mm", "feasible", "trigger_force_n", "output_force_n",
                       "output_force_torsion_n", "output_energy_mj", "torsion_margin", "score"],
                      [(r["L"], r["feasible"], *(r.get(k, float("nan")) for k in (
                          "trigger_force", "output_force", "output_force_torsion",
                          "output_energy", "torsion_margin", "score"))) for r in rows])
        out = {"search": "beam-length", "best_length_mm": best}
    else:
        lo, hi = (float(x) for x in args.range.split(":"))
        best, table, warning = optimize_fin_area(lo, hi, cfg, jobs=args.jobs)
        run.write_csv("sweep.csv", ["area_mm2", "peak_thrust_n", "impulse_ns", "status"],
                      [(r.area, r.peak_thrust, r.impulse, r.status) for r in table])
        out = {"search": "fin-area", "best_area_mm2": best, "warning": warning}
        if warning:
            print(f"warning: {warning}", file=sys.stderr)
    run.write_json("summary.json", out)
    print(json.dumps(_plain(out), sort_keys=True))


COMMANDS = {
    "validate": cmd_validate, "simulate": cmd_simulate, "sweep": cmd_sweep,
    "steer": cmd_steer, "calibrate": cmd_calibrate, "optimize": cmd_optimize,
}


def build_parser():
    p = argparse.ArgumentParser(prog="lamsa", description="Bistable-fin swimmer simulator")
    p.add_argument("--version", action="version", version=f"lamsa {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (defaults for anything omitted)")
    common.add_argument("--calibration", help="calibration JSON applied over the config")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--jobs", type=int, default=1, help="concurrent evaluations")
    common.add_argument("--out", default="runs", help="parent of the run directory")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="beam-length feasibility report")
    s = sub.add_parser("simulate", parents=[common], help="one cycle plus body motion")
    s.add_argument("--cycles", type=int, help="body cycles (default from [sim])")
    s.add_argument("--deflection", type=float, nargs=4, metavar="DEG",
                   help="per-fin deflection angles")
    s.add_argument("--cycle-only", action="store_true", help="skip the body simulation")
    s = sub.add_parser("sweep", parents=[common], help="fin-area sweep")
    s.add_argument("--areas", default="1000:4500:500", help="lo:hi:step or list, mm^2")
    s = sub.add_parser("steer", parents=[common], help="scripted steering run")
    s.add_argument("--script", help="time_s, fin_id, beta_deg per line")
    s.add_argument("--duration", type=float, help="seconds (default last command + 10)")
    s = sub.add_parser("calibrate", parents=[common], help="fit constants to the targets")
    s.add_argument("--budget", type=int, help="objective evaluations")
    s = sub.add_parser("optimize", parents=[common], help="design searches")
    s.add_argument("--search", choices=("beam-length", "fin-area"), default="fin-area")
    s.add_argument("--lengths", default="38,40,42", help="candidate beam lengths, mm")
    s.add_argument("--range", default="1000:4500", help="fin area range lo:hi, mm^2")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    run = None
    try:
        cfg = _load_config(args)
        run = RunDir(args.out, cfg, " ".join(["lamsa"] + list(argv if argv is not None
                                                                else sys.argv[1:])))
        COMMANDS[args.command](cfg, run, args)
    except LamsaError as exc:
        err = exc.to_dict()
        err["exit_code"] = exc.exit_code
        text = json.dumps(_plain(err), sort_keys=True)
        if run is not None:
            run.write_text("error.json", text)
        print(text, file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        text = json.dumps({"error": "io_error", "message": str(exc), "exit_code": 3})
        print(text, file=sys.stderr)
        return 3
    if run is not None:
        print(f"run directory: {run.path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
