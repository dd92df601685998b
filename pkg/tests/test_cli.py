import csv
import io
import json
import math
import os

import pytest

from catlift import cli
from catlift.config import ConfigError, default_config, parse_config

BASE = """
schema_version = 1
[[setup]]
name = "fig"
mass_kg = 1e-14
omega_rad_s = 100.0
delta_x = 3.0
distance_m = 40e-6
[protocol]
t_minus = {t}
[grid]
t_start = 0.5
t_stop = 3.0
t_points = 4
[wigner]
times = [0.0, 1.0]
points = 5
[robustness]
sigma_eps = [1e-5, 1e-4]
[run]
samples = 2000
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(BASE.format(t=0.6 * math.pi))
    return p


def run(args, capsys):
    code = cli.main(args)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_default_config_table_columns(capsys, tmp_path):
    out = tmp_path / "t.csv"
    code, _, err = run(["table", "--config", str(_default_file(tmp_path)), "--out", str(out)], capsys)
    assert code == 0, err
    rows = read_csv(out.read_text())
    x0 = [float(r["x0_m"]) for r in rows]
    for got, want in zip(x0, (7.3e-11, 7.3e-12, 7.3e-13)):
        assert got == pytest.approx(want, rel=0.01)
    assert float(rows[1]["g_G"]) == pytest.approx(2.1e-15, rel=0.05)
    for r in rows:
        assert float(r["t_tot"]) == pytest.approx(3 * math.pi + 2 * float(r["t_opt_G"]), abs=1e-10)


def _default_file(tmp_path):
    from catlift.config import default_config_text

    p = tmp_path / "default.toml"
    p.write_text(default_config_text())
    return p


def test_trajectory_endpoints(cfg_path, capsys):
    code, out, _ = run(["trajectory", "--config", str(cfg_path)], capsys)
    assert code == 0
    rows = read_csv(out)
    first, last = rows[0], rows[-1]
    assert float(first["x_plus"]) == pytest.approx(3.0) and float(first["x_minus"]) == pytest.approx(-3.0)
    assert float(last["x_plus"]) == pytest.approx(-3.0, abs=1e-10)
    assert float(last["x_minus"]) == pytest.approx(3.0, abs=1e-10)
    assert float(last["sigma_xx"]) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("command", cli.COMMANDS)
def test_every_command_roundtrips(command, cfg_path, tmp_path, capsys):
    out_csv = tmp_path / f"{command}.csv"
    out_json = tmp_path / f"{command}.json"
    assert run([command, "--config", str(cfg_path), "--out", str(out_csv)], capsys)[0] == 0
    assert run([command, "--config", str(cfg_path), "--out", str(out_json), "--format", "json"], capsys)[0] == 0
    text = out_csv.read_text()
    header = text.splitlines()[0].split(",")
    rows = read_csv(text)
    assert rows and all(len(r) == len(header) for r in rows)
    doc = json.loads(out_json.read_text())
    assert doc["columns"] == header and doc["schema_version"] == 1 and doc["command"] == command
    assert len(doc["rows"]) == len(rows)
    for row in doc["rows"]:
        for k, v in row.items():
            if isinstance(v, float):
                assert math.isfinite(v), (k, v)


def test_determinism_with_seed(cfg_path, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(["robustness", "--config", str(cfg_path), "--out", str(a), "--seed", "42"], capsys)
    run(["robustness", "--config", str(cfg_path), "--out", str(b), "--seed", "42"], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_gie_without_coupling_has_no_entanglement(tmp_path, capsys):
    p = tmp_path / "c.toml"
    p.write_text(BASE.format(t=1.0).replace("distance_m = 40e-6", "distance_m = 1e3"))
    code, out, _ = run(["gie", "--config", str(p)], capsys)
    assert code == 0
    assert all(float(r["lambda_pt"]) >= -1e-12 for r in read_csv(out))


def test_unknown_key_rejected_with_field_path(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text(BASE.format(t=1.0).replace("delta_x = 3.0", "delta_x = 3.0\ncolour = 1"))
    code, _, err = run(["trajectory", "--config", str(p)], capsys)
    assert code == 2
    assert "setup[0].colour" in err


def test_syntax_error_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("schema_version = 1\n[[setup]\n")
    code, _, err = run(["table", "--config", str(p)], capsys)
    assert code == 2 and "line 2" in err


def test_schema_version_checked():
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(BASE.format(t=1.0).replace("schema_version = 1", "schema_version = 2"))


def test_missing_config_and_bad_command(tmp_path, capsys):
    assert run(["table", "--config", str(tmp_path / "nope.toml")], capsys)[0] == 2
    assert run(["frobnicate", "--config", "x"], capsys)[0] == 2


def test_unwritable_output_leaves_nothing(cfg_path, tmp_path, capsys):
    target = tmp_path / "missing-dir" / "out.csv"
    code, _, err = run(["force", "--config", str(cfg_path), "--out", str(target)], capsys)
    assert code == 3 and not target.exists()


def test_failed_run_keeps_previous_file(tmp_path, capsys):
    p = tmp_path / "c.toml"
    # table needs a distance for every set-up
    p.write_text(BASE.format(t=1.0).replace("distance_m = 40e-6\n", ""))
    out = tmp_path / "o.csv"
    out.write_text("old\n")
    code, _, _ = run(["table", "--config", str(p), "--out", str(out)], capsys)
    assert code == 2
    assert out.read_text() == "old\n"
    assert sorted(os.listdir(tmp_path)) == ["c.toml", "o.csv"]


def test_default_config_parses():
    cfg = default_config()
    assert [s.name for s in cfg.setup] == ["setup-1", "setup-2", "setup-3"]


@pytest.mark.parametrize("command", ["trajectory", "wigner", "force"])
def test_shipped_config_runs_at_optimal_expansion(command, tmp_path, capsys):
    # the shipped file leaves t_minus unset, so the run uses T_o^G ~ 12
    code, out, err = run([command, "--config", str(_default_file(tmp_path))], capsys)
    assert code == 0, err
    assert len(read_csv(out)) > 1
