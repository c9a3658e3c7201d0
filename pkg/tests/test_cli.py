import csv
import io
import json

import pytest

from lambda_nav.cli import crossing_speeds, main, path_trajectory, read_path_csv
from lambda_nav.errors import LambdaNavError
from lambda_nav.sim import TraceRecord

SHORT = """
name = "short"
[reference]
path = [[-8.0, 0.0], [-5.0, 0.0]]
"""

BUMP_PASS = """
name = "bump_pass"
[reference]
path = [[-3.0, 0.0], [3.0, 0.0]]
[[environment]]
type = "speed_bump"
x = 0.0
y = 0.0
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def path_csv(tmp_path, v, name="path.csv", x0=-2.0, x1=2.0):
    rows = ["x,y,v"] + [f"{x0 + i * (x1 - x0) / 20},0.0,{v}" for i in range(21)]
    return write(tmp_path, name, "\n".join(rows) + "\n")


def profile(capsys, *args):
    assert main(["risk-profile", *map(str, args)]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    return sum(float(r["K"]) * float(r["r"]) for r in rows), rows


def test_run_writes_outputs_and_exits_zero(tmp_path):
    cfg = write(tmp_path, "short.toml", SHORT)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out), "--seed", "2"]) == 0
    for name in ("trace.csv", "lambda_field.csv", "dem.csv", "summary.json"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["goal_reached"] is True and summary["status"] == "goal"
    assert summary["seed"] == 2
    assert summary["max_expected_risk"] == 0.0
    assert summary["path_length"] == pytest.approx(2.7, abs=0.2)
    assert {"total_time", "min_crossing_speed", "max_ground_truth_risk"} <= set(summary)


def test_batch_run_uses_subdirectories(tmp_path):
    a = write(tmp_path, "a.toml", SHORT)
    b = write(tmp_path, "b.toml", SHORT.replace("short", "other"))
    out = tmp_path / "out"
    assert main(["run", str(a), str(b), "--out", str(out), "--jobs", "2", "--threshold", "0"]) == 0
    assert json.loads((out / "b" / "summary.json").read_text())["scenario"] == "other"
    assert (out / "a" / "trace.csv").read_bytes() == (out / "b" / "trace.csv").read_bytes()


def test_blocked_corridor_exits_two(tmp_path):
    assert main(["run", "walls_blocked", "--out", str(tmp_path), "--threshold", "0"]) == 2
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["status"] == "stall" and summary["goal_reached"] is False


def test_errors_exit_one(tmp_path, capsys):
    bad = write(tmp_path, "bad.toml", "[wheel]\nm = -1\n")
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "wheel.m" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.toml"), "--out", str(tmp_path / "o")]) == 1
    assert main(["risk-profile", "empty", str(path_csv(tmp_path, 1.0)), "--passes", "-1"]) == 1


def test_risk_profile_off_grid_path_exits_one(tmp_path):
    far = path_csv(tmp_path, 1.0, x0=5.0, x1=12.0)
    assert main(["risk-profile", "empty", str(far), "--passes", "0"]) == 1


def test_risk_profile_flat_ground(tmp_path, capsys):
    E, rows = profile(capsys, "empty", path_csv(tmp_path, 1.5))
    assert E == 0.0
    assert list(rows[0]) == ["step", "col", "row", "v", "H", "psi", "K", "r"]


def test_risk_profile_monotone_in_speed(tmp_path, capsys):
    cfg = write(tmp_path, "bump.toml", BUMP_PASS)
    fast, _ = profile(capsys, cfg, path_csv(tmp_path, 1.5, "fast.csv"))
    slow, _ = profile(capsys, cfg, path_csv(tmp_path, 0.5, "slow.csv"))
    assert fast > slow > 0
    unseen, _ = profile(capsys, cfg, path_csv(tmp_path, 1.5, "fast.csv"), "--passes", "0")
    assert unseen == 0.0


def test_map_dump(tmp_path):
    cfg = write(tmp_path, "bump.toml", BUMP_PASS)
    assert main(["map-dump", str(cfg), "--out", str(tmp_path / "m")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "m" / "lambda_field.csv")))
    assert len(rows) == 200 * 200
    assert max(float(r["lambda"]) for r in rows) > 0


def test_read_path_csv_errors(tmp_path):
    with pytest.raises(LambdaNavError):
        read_path_csv(write(tmp_path, "a.csv", "x,y\n0,0\n"))
    with pytest.raises(LambdaNavError):
        read_path_csv(write(tmp_path, "b.csv", "x,y,v\n0,zero,1\n"))
    with pytest.raises(LambdaNavError):
        read_path_csv(write(tmp_path, "c.csv", "x,y,v\n"))


def test_path_trajectory_headings_and_speeds():
    start, traj = path_trajectory([(0, 0, 1.0), (1, 0, 0.5), (1, 1, 0.0)])
    assert start[:2] == (0, 0) and start[2] == 0.0
    assert [u.v for _, u in traj] == [1.0, 0.5]
    assert traj[-1][0][2] == pytest.approx(1.5707963267948966)


def test_crossing_speeds():
    rec = lambda v, ev: TraceRecord(0, 0, 0, 0, v, 0, 0, 0, 0, 0, ev)
    trace = [rec(1.5, ""), rec(0.6, "climb"), rec(0.5, "top"), rec(0.7, "off_obstacle"), rec(1.5, "")]
    assert crossing_speeds(trace) == [0.6, 0.5]
    assert crossing_speeds([rec(1.0, "")]) == []
