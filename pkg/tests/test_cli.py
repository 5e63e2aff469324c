import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from payload_transport.cli import main, read_waypoint_table, waypoint_table
from payload_transport.errors import ConfigError
from payload_transport.route import WaypointPath
from payload_transport.terrain import read_map

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

FLAT = """terrain.width = 30
terrain.length = 20
terrain.density = 0
terrain.relief = 0
mission.start = 5, 10, 2
mission.goal = 15, 10, 2
"""


def _stderr_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


@pytest.fixture
def tower_cfg(tmp_path):
    rows = []
    for r in range(20):
        rows.append(" ".join("12" if 8 <= r < 12 and 18 <= c < 22 else "0" for c in range(30)))
    (tmp_path / "tower.grid").write_text("ncols 30\nnrows 20\nxll 0\nyll 0\ncellsize 1\n" + "\n".join(rows) + "\n")
    path = tmp_path / "tower.cfg"
    path.write_text("terrain.file = tower.grid\nmission.start = 5, 10, 2\nmission.goal = 20, 10, 3\n")
    return path


def test_run_flat_hop_end_to_end(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    times = tmp_path / "times.csv"
    code = main(["run", str(CONFIGS / "flat_hop.cfg"), "--trace", str(trace),
                 "--times-out", str(times)])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["category"] == "ok" and summary["max_rotor_speed"] < 400
    assert summary["waypoints"] == 2
    assert trace.read_text().splitlines()[1].startswith("t,x,y,z")
    traj = read_waypoint_table(times)
    assert traj.times[0] == 0.0 and traj.times[-1] == summary["t_N"]


def test_simulate_replays_a_time_table(tmp_path, capsys):
    cfg = tmp_path / "flat.cfg"
    cfg.write_text(FLAT)
    times = tmp_path / "times.csv"
    assert main(["time", str(cfg), "-o", str(times)]) == 0
    assert main(["simulate", str(cfg), "--times", str(times), "--summary",
                 str(tmp_path / "s.json")]) == 0
    assert json.loads((tmp_path / "s.json").read_text())["category"] == "ok"


def test_plan_prints_a_waypoint_table(capsys):
    assert main(["plan", str(CONFIGS / "flat_hop.cfg")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n,x,y,z"
    assert lines[1] == "1,5.0,10.0,2.0" and lines[-1].endswith(",15.0,10.0,2.0")


def test_goal_inside_a_building_has_no_path(tower_cfg, capsys):
    assert main(["plan", str(tower_cfg)]) == 3
    err = _stderr_json(capsys)
    assert err["status"] == "error" and err["category"] == "no-path" and err["phase"] == "terrain"


def test_terrain_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.grid", tmp_path / "b.grid"
    assert main(["terrain", "--seed", "7", "--width", "60", "--length", "40", "-o", str(a)]) == 0
    assert main(["terrain", "--seed", "7", "--width", "60", "--length", "40", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    emap = read_map(a)
    assert emap.heights.shape == (40, 60)


@pytest.mark.parametrize("text, fragment", [
    ("mission.start = 1, 2\n", "expected 3 numbers"),
    ("colour = blue\n", "unknown key"),
    ("terrain.density = 0\n", "missing required key"),
])
def test_bad_configs_exit_two(tmp_path, capsys, text, fragment):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    assert main(["plan", str(cfg)]) == 2
    err = _stderr_json(capsys)
    assert err["category"] == "config" and fragment in err["message"]


def test_missing_file_and_bad_arguments(tmp_path, capsys):
    assert main(["plan", str(tmp_path / "nope.cfg")]) == 2
    assert _stderr_json(capsys)["category"] == "io"
    assert main(["frobnicate"]) == 2
    assert main(["terrain", "--density", "1.5"]) == 2


def test_waypoint_table_round_trip(tmp_path):
    wp = WaypointPath([(0.1, 0.2, 0.3), (1.0 / 3.0, 2.0, 3.0)])
    path = tmp_path / "t.csv"
    path.write_text(waypoint_table(wp, (0.0, 1.2345678901234567)))
    traj = read_waypoint_table(path)
    assert (traj.waypoints.points == wp.points).all() and traj.times[1] == 1.2345678901234567
    path.write_text(waypoint_table(wp))
    with pytest.raises(ConfigError):
        read_waypoint_table(path)
    path.write_text(waypoint_table(wp, (0.0, 0.0)))
    with pytest.raises(ConfigError):
        read_waypoint_table(path)


def test_console_module_runs():
    env = dict(os.environ)
    out = subprocess.run([sys.executable, "-m", "payload_transport.cli", "--version"],
                         capture_output=True, text=True, env=env, check=False)
    assert out.returncode == 0 and out.stdout.strip()
