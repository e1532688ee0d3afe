import csv
import json
import subprocess
import sys

import pytest

from wlansdar.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from wlansdar.config import SEED_ENV, ConfigError, load_config, parse_config


def write_cfg(tmp_path, **raw):
    base = {"nodes": 3, "lambda": 20.0, "buffer": 3, "sim": {"horizon": 2.0}}
    base.update(raw)
    p = tmp_path / "run.json"
    p.write_text(json.dumps(base))
    return str(p)


def run(tmp_path, *args, **raw):
    cfg = write_cfg(tmp_path, **raw)
    return main([args[0], "--config", cfg, *args[1:]])


def test_saturation_csv(tmp_path, capsys):
    assert run(tmp_path, "saturation", "--max-n", "4") == EXIT_OK
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert [r["n"] for r in rows] == ["1", "2", "3", "4"]
    assert float(rows[0]["gamma"]) == 0.0
    assert all(float(r["residual"]) < 1e-12 for r in rows)


def test_analyze_csv_and_json(tmp_path, capsys):
    assert run(tmp_path, "analyze") == EXIT_OK
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert rows[0]["m"] == "3" and rows[0]["k"] == "3"
    assert run(tmp_path, "analyze", "--json") == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["converged"] is True and len(doc["p_n"]) == 4


def test_validate_reports_checks(tmp_path, capsys):
    assert run(tmp_path, "validate", nodes=2, buffer=2) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["fixed_point"]["max_residual"] < 1e-12
    assert doc["chain"]["row_sum_error"] < 1e-12
    assert doc["oracle"]["tv"] < 1e-2
    assert doc["stability"]["stable_sufficient"] is True


def test_dump_chain_rows_sum_to_one(tmp_path):
    out = tmp_path / "p.csv"
    assert run(tmp_path, "dump-chain", "--q", "0.5", "--out", str(out)) == EXIT_OK
    sums = {}
    for r in csv.DictReader(out.open()):
        key = (r["from_j"], r["from_k"])
        sums[key] = sums.get(key, 0.0) + float(r["prob"])
    assert len(sums) == 4 * 3
    assert all(abs(v - 1) < 1e-9 for v in sums.values())


def test_simulate_outputs_are_byte_identical(tmp_path, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "7")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(tmp_path, "simulate", "--engine", "both", "--out", str(a)) == EXIT_OK
    assert run(tmp_path, "simulate", "--engine", "both", "--seed", "99", "--out", str(b)) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()  # env seed beats --seed
    assert set(json.loads(a.read_text())) == {"sdar", "dcf"}


def test_seed_flag_changes_output(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv(SEED_ENV, raising=False)
    run(tmp_path, "simulate", "--seed", "1")
    first = capsys.readouterr().out
    run(tmp_path, "simulate", "--seed", "2")
    assert capsys.readouterr().out != first


def test_trace_written_to_output_dir(tmp_path):
    assert run(tmp_path, "simulate", "--trace", "tr.csv", output_dir=str(tmp_path / "o")) == EXIT_OK
    lines = (tmp_path / "o" / "tr.csv").read_text().splitlines()
    assert lines[0] == "time_ns,kind,node,n_nonempty" and len(lines) > 1


def test_sweep_keeps_lambda_order_with_workers(tmp_path):
    lams = [60.0, 5.0, 30.0]
    one, two = tmp_path / "1.csv", tmp_path / "2.csv"
    assert run(tmp_path, "sweep", "--out", str(one), sweep=lams) == EXIT_OK
    assert run(tmp_path, "sweep", "--out", str(two), sweep=lams, workers=2) == EXIT_OK
    assert one.read_bytes() == two.read_bytes()
    assert [float(r["lambda"]) for r in csv.DictReader(one.open())] == lams


def test_sweep_with_simulation_columns(tmp_path, capsys):
    assert run(tmp_path, "sweep", "--sim", "sdar", sweep={"start": 10, "stop": 20, "step": 10}) == EXIT_OK
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert [r["lambda"] for r in rows] == ["10.0", "20.0"]
    assert "sim_theta_node" in rows[0]


@pytest.mark.parametrize(
    "raw",
    [
        {"nodes": 0},
        {"nodes": 2, "lambda": -1.0},
        {"nodes": 2, "buffer": 0},
        {"nodes": 2, "colour": "red"},
        {"nodes": 2, "mac": {"cw_min": 0}},
        {"nodes": 2, "sim": {"engine": "ns2"}},
        {"lambdas": [1.0, 2.0]},
    ],
)
def test_bad_configs_exit_two(tmp_path, raw, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(raw))
    assert main(["analyze", "--config", str(p)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_and_malformed_config(tmp_path):
    assert main(["analyze", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert main(["validate", "--config", str(p)]) == EXIT_CONFIG


def test_numeric_failure_exits_three(tmp_path, monkeypatch):
    import wlansdar.cli as cli
    from wlansdar.errors import NoConvergence

    def boom(*a, **k):
        raise NoConvergence("stuck")

    monkeypatch.setattr(cli, "analyze", boom)
    assert run(tmp_path, "analyze") == EXIT_NUMERIC


def test_config_defaults():
    cfg = parse_config({"nodes": 2})
    assert cfg.sim.seed == 0 and cfg.output_dir is None


def test_load_config_env(tmp_path):
    p = write_cfg(tmp_path)
    cfg = load_config(p, env={SEED_ENV: "5", "WLANSDAR_OUTPUT_DIR": "/tmp/x"})
    assert cfg.sim.seed == 5 and cfg.output_dir == "/tmp/x"
    with pytest.raises(ConfigError):
        load_config(p, env={SEED_ENV: "five"})


def test_sweep_range():
    cfg = parse_config({"nodes": 2, "sweep": {"start": 0.1, "stop": 0.3, "step": 0.1}})
    assert cfg.sweep == [0.1, 0.2, 0.3]
    with pytest.raises(ConfigError):
        parse_config({"nodes": 2, "sweep": {"start": 1}})


def test_console_entry_point(tmp_path):
    cfg = write_cfg(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "wlansdar.cli", "saturation", "--config", cfg],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("n,beta")
