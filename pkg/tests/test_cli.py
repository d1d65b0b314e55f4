import json
import os

import pytest

from lamsa import __version__
from lamsa.cli import main
from lamsa.config import default_config


def run_dir(out):
    (name,) = [d for d in os.listdir(out)]
    return os.path.join(out, name)


def read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def test_validate_default(tmp_path, capsys):
    assert main(["validate", "--out", str(tmp_path)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["feasible"] is True
    assert set(rep["checks"]) >= {"longer_than_widest_spacing", "compression_limit", "length_band"}
    d = run_dir(tmp_path)
    assert os.path.basename(d).endswith(default_config().digest()[:10])
    assert "defaults used:" in read(os.path.join(d, "run.log"))
    assert read(os.path.join(d, "config.ini")) == default_config().canonical()


def test_validate_infeasible_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[beam]\nlength_mm = 60\n")
    assert main(["validate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "infeasible_design" and err["violated"]
    assert os.path.exists(os.path.join(run_dir(tmp_path / "o"), "error.json"))


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[beam]\nlength = 40\n")
    assert main(["validate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["line"] == 2 and err["error"] == "config_error"


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code != 0


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = main(["validate", "--out", str(blocker / "sub")])
    assert code != 0
    assert "error" in json.loads(capsys.readouterr().err)


def test_sweep_writes_eight_rows(tmp_path):
    assert main(["sweep", "--areas", "1000:4500:500", "--out", str(tmp_path)]) == 0
    lines = read(os.path.join(run_dir(tmp_path), "sweep.csv")).splitlines()
    assert lines[0] == f"# lamsa {__version__} config_sha256={default_config().digest()}"
    assert lines[1] == "area_mm2,peak_thrust_n,impulse_ns,status"
    assert len(lines) == 2 + 8
    assert [float(r.split(",")[0]) for r in lines[2:]] == [1000.0 + 500 * k for k in range(8)]


def test_sweep_rows_same_for_any_job_count(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", "--areas", "2000,3000,4000", "--jobs", "1", "--out", str(a)]) == 0
    assert main(["sweep", "--areas", "2000,3000,4000", "--jobs", "2", "--out", str(b)]) == 0
    assert read(os.path.join(run_dir(a), "sweep.csv")) == read(os.path.join(run_dir(b), "sweep.csv"))


def test_simulate_reruns_are_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / str(k)
        assert main(["simulate", "--cycles", "5", "--seed", "7", "--out", str(out)]) == 0
        outs.append(run_dir(out))
    for name in ("cycle.csv", "trajectory.csv", "summary.json", "config.ini"):
        assert read(os.path.join(outs[0], name)) == read(os.path.join(outs[1], name))
    summary = json.loads(read(os.path.join(outs[0], "summary.json")))
    assert summary["tool_version"] == __version__
    assert len(summary["per_cycle"]) >= 4
    assert "seed.value" not in read(os.path.join(outs[0], "run.log"))


def test_run_directories_never_overwrite(tmp_path):
    for _ in range(2):
        assert main(["simulate", "--cycle-only", "--out", str(tmp_path)]) == 0
    assert len(os.listdir(tmp_path)) == 2


def test_steer_default_script(tmp_path):
    assert main(["steer", "--duration", "55", "--out", str(tmp_path)]) == 0
    d = run_dir(tmp_path)
    summary = json.loads(read(os.path.join(d, "summary.json")))
    assert summary["commands"][0][0] == 0.0
    assert summary["final_state"]["yaw"] != 0.0
    assert read(os.path.join(d, "trajectory.csv")).splitlines()[1].startswith("t_s,x_mm,y_mm,z_mm,yaw")


def test_steer_conflicting_script(tmp_path):
    script = tmp_path / "s.txt"
    script.write_text("0, 1, 10\n0, 1, -10\n")
    assert main(["steer", "--script", str(script), "--out", str(tmp_path / "o")]) == 2


def test_optimize_beam_length(tmp_path, capsys):
    assert main(["optimize", "--search", "beam-length", "--out", str(tmp_path)]) == 0
    summary = json.loads(read(os.path.join(run_dir(tmp_path), "summary.json")))
    assert summary["best_length_mm"] == 40.0


def test_calibration_file_applies(tmp_path, capsys):
    from importlib import resources

    path = str(resources.files("lamsa").joinpath("data/calibration.json"))
    assert main(["simulate", "--cycle-only", "--calibration", path, "--out", str(tmp_path)]) == 0
    assert os.path.basename(run_dir(tmp_path)).endswith(default_config().digest()[:10])
