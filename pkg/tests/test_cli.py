import json
import math

import pytest

from qotto import cli
from qotto.cli import ConfigError, parse_grid, parse_real


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def table(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, l.split(","))) for l in lines[1:]]


def test_parse_real_and_grid():
    assert parse_real("pi/5") == pytest.approx(math.pi / 5, abs=1e-15)
    assert parse_real("2*pi") == pytest.approx(2 * math.pi, abs=1e-15)
    assert parse_real("1e-3") == 1e-3
    assert parse_real("2/3") == 2 / 3
    assert parse_grid("") == ()
    assert parse_grid("0:1:3") == (0.0, 0.5, 1.0)
    assert parse_grid("log:1:100:3") == pytest.approx((1.0, 10.0, 100.0))
    assert parse_grid("0.1, 0.2") == (0.1, 0.2)
    with pytest.raises(ConfigError):
        parse_grid("a:b")


def test_sweep_is_deterministic_across_threads(tmp_path, monkeypatch):
    args = ["sweep", "--theta", "pi/5", "--grid", "0.05:0.6:6"]
    monkeypatch.setenv("OTTO_THREADS", "1")
    code1, a = run(tmp_path, "a.csv", *args)
    code2, b = run(tmp_path, "b.csv", *args)
    monkeypatch.setenv("OTTO_THREADS", "2")
    code3, c = run(tmp_path, "c.csv", *args)
    assert code1 == code2 == code3 == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    rows = table(a)
    assert len(rows) == 6
    assert list(rows[0]) == list(cli.SWEEP_COLUMNS)
    assert all(r["status"] == "ok" for r in rows)


def test_header_records_configuration(tmp_path):
    code, out = run(tmp_path, "s.csv", "disorder-sweep", "--disorder", "gaussian:0.1", "--grid", "0.1")
    assert code == 0
    header = [l for l in out.read_text().splitlines() if l.startswith("#")]
    assert "# command = disorder-sweep" in header
    assert "# disorder = gaussian:0.1" in header
    assert any(l.startswith("# disorder_normalization") for l in header)


def test_empty_grid_writes_header_only(tmp_path):
    code, out = run(tmp_path, "e.csv", "sweep", "--theta", "0.3", "--grid", "")
    assert code == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert lines == [",".join(cli.SWEEP_COLUMNS)]


def test_json_output(tmp_path):
    code, out = run(tmp_path, "p.json", "pv-curve", "--theta", "0", "--grid", "0.1,0.3", "--format", "json")
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["columns"] == list(cli.PV_COLUMNS)
    assert [r["alpha_t_tot"] for r in doc["rows"]] == [0.1, 0.3]
    assert doc["config"]["command"] == "pv-curve"


def test_config_file_with_flag_override(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# collinear cycle\ntheta = 0\nalpha_t = 0.5\nbeta_h = 0.5\n")
    code, out = run(tmp_path, "c.csv", "cycle", "--config", str(conf), "--alpha-t", "0.25")
    assert code == 0
    row = table(out)[0]
    assert float(row["omega2"]) == pytest.approx(1.25, abs=1e-9)
    assert float(row["eta"]) == pytest.approx(1 - 1 / 1.25, abs=1e-9)


def test_cycle_writes_trajectory(tmp_path):
    code, out = run(tmp_path, "cyc.csv", "cycle", "--theta", "pi/5", "--alpha-t", "0.5513", "--samples", "8")
    assert code == 0
    traj = tmp_path / "cyc_trajectory.csv"
    rows = table(traj)
    assert {r["stroke"] for r in rows} == {"1-2", "2-3", "3-4", "4-1"}
    row = table(out)[0]
    assert row["pwc"] == "true"


def test_friction_loop_table(tmp_path):
    code, out = run(tmp_path, "f.csv", "friction-loop", "--alpha-grid", "0.1,1")
    assert code == 0
    rows = table(out)
    assert [float(r["alpha"]) for r in rows] == [0.1, 1.0]
    assert all(float(r["relative_entropy"]) >= 0 for r in rows)


def test_max_power_scan(tmp_path):
    code, out = run(
        tmp_path, "m.csv", "max-power", "--scan-param", "sigma2", "--scan", "0.01,1",
        "--grid", "log:1e-3:0.4:16", "--refine-tol", "1e-4",
    )
    assert code == 0
    rows = table(out)
    assert float(rows[0]["p_max_over_alpha2"]) > float(rows[1]["p_max_over_alpha2"])


def test_optics_compile_matched_cycle(tmp_path):
    # beta_h = 1 / omega2 for theta = 0, x = 0.5
    code, out = run(tmp_path, "o.txt", "optics-compile", "--theta", "0", "--alpha-t", "0.5", "--beta-h", "2/3")
    assert code == 0
    body = [l for l in out.read_text().splitlines() if l and not l.startswith("#")]
    assert [l.split()[0] for l in body] == ["ROT", "ROT", "THERM", "ROT", "ROT", "ROT", "THERM", "ROT"]


@pytest.mark.parametrize(
    "args",
    [
        ["cycle", "--theta", "0.3", "--beta-h", "2", "--alpha-t", "0.2"],
        ["cycle", "--alpha-t", "0.2"],
        ["sweep", "--theta", "0.3", "--grid", "1:2"],
        ["disorder-sweep", "--grid", "0.1"],
        ["disorder-sweep", "--disorder", "cauchy:1", "--grid", "0.1"],
        ["cycle", "--theta", "0.3", "--alpha", "-1", "--alpha-t", "0.2"],
    ],
)
def test_config_errors_exit_2(tmp_path, args):
    code, _ = run(tmp_path, "x.csv", *args)
    assert code == 2


def test_unknown_config_key_exits_2(tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("temperature = 3\n")
    code, _ = run(tmp_path, "x.csv", "cycle", "--config", str(conf))
    assert code == 2


def test_bad_thread_count_exits_2(tmp_path, monkeypatch):
    monkeypatch.setenv("OTTO_THREADS", "zero")
    code, _ = run(tmp_path, "x.csv", "sweep", "--theta", "0.3", "--grid", "0.1")
    assert code == 2


def test_infeasible_program_exits_3(tmp_path, capsys):
    code, _ = run(tmp_path, "o.txt", "optics-compile", "--theta", "pi/5", "--alpha-t", "0.5513")
    assert code == 3
    assert "4-1" in capsys.readouterr().err


def test_nonconvergence_exits_3(tmp_path):
    code, _ = run(tmp_path, "f.csv", "friction-loop", "--alpha-grid", "1", "--max-steps", "64", "--tol", "1e-12")
    assert code == 3


def test_boundary_maximum_exits_4(tmp_path):
    code, _ = run(tmp_path, "m.csv", "max-power", "--scan-param", "sigma2", "--scan", "0.01", "--grid", "0.2:0.9:8")
    assert code == 4


def test_unknown_command_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["spin"])
    assert exc.value.code == 2
