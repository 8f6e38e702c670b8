import json

import numpy as np
import pytest
from click.testing import CliRunner

from cavitychaos.chaos import AxisSpec, GridMap
from cavitychaos.cli import main, run
from cavitychaos.io import (config_hash, read_exit_records_csv, read_json,
                            read_table_csv, write_records, write_table_csv)
from cavitychaos.scattering import ExitRecord

BASE_CONFIG = {
    "experiment": "rabi",
    "model": {"delta": 0.4, "alpha": 1e-3},
    "field": {"kind": "fock", "n": 10},
    "atom": {"kind": "excited"},
    "rabi": {"t_max": 10.0, "samples": 11, "p0": 50.0},
}


def random_records(n, seed=0):
    rng = np.random.default_rng(seed)
    return [ExitRecord(float(rng.uniform(8, 80)),
                       float(rng.exponential(200.0)),
                       ("left", "right", "none")[i % 3], int(i % 4),
                       bool(i % 3 == 2), bool(i % 5),
                       float(rng.uniform(0, 1e-9)) * 10.0 ** -rng.integers(0, 6),
                       float(rng.uniform(0, 1e-9)), False)
            for i in range(n)]


def test_config_hash_canonical():
    a = {"x": 1, "y": [1.5, 2.0]}
    b = {"y": [1.5, 2.0], "x": 1}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({"x": 2, "y": [1.5, 2.0]})


def test_csv_round_trip_bit_exact(tmp_path):
    records = random_records(64)
    path = tmp_path / "records.csv"
    write_records(records, path)
    assert read_exit_records_csv(path) == records


def test_json_round_trip_bit_exact(tmp_path):
    records = random_records(64, seed=3)
    path = tmp_path / "records.json"
    write_records(records, path, fmt="json", metadata={"note": "test"})
    env = read_json(path)
    assert env["schema_version"] == 1
    assert env["kind"] == "exit_records"
    cols = env["data"]
    back = [ExitRecord(cols["p0"][i], cols["T"][i], cols["detector"][i],
                       cols["m"][i], cols["trapped"][i],
                       cols["conservation_ok"][i], cols["w_drift"][i],
                       cols["r_drift"][i], cols["failed"][i])
            for i in range(len(cols["p0"]))]
    assert back == records


def test_table_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    table = {"tau": rng.uniform(0, 1e4, 32), "z": rng.normal(size=32)}
    path = tmp_path / "t.csv"
    write_table_csv(table, path)
    back = read_table_csv(path)
    assert np.array_equal(back["tau"], table["tau"])
    assert np.array_equal(back["z"], table["z"])


def test_empty_records_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    write_records([], path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("p0,")


def test_grid_map_json_shape(tmp_path):
    axes = (AxisSpec("delta", 0.0, 1.0, 2), AxisSpec("alpha", 1e-4, 1e-2, 2))
    grid = GridMap(axes=axes, values=np.arange(4.0).reshape(2, 2))
    path = tmp_path / "g.json"
    write_records(grid, path, fmt="json")
    env = read_json(path)
    assert len(env["data"]["axes"]) == 2
    assert len(env["data"]["axes"][0]["values"]) == 2
    assert np.array(env["data"]["values"]).shape == (2, 2)


def test_unknown_payload_rejected(tmp_path):
    with pytest.raises(TypeError):
        write_records(object(), tmp_path / "x.csv")


def write_config(tmp_path, cfg):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_cli_rabi_runs(tmp_path):
    path = write_config(tmp_path, BASE_CONFIG)
    out = tmp_path / "out.csv"
    result = CliRunner().invoke(
        main, ["rabi", "--config", path, "--out", str(out)])
    assert result.exit_code == 0, result.output
    cols = read_table_csv(out)
    assert len(cols["tau"]) == 11
    meta = read_json(str(out) + ".meta.json")
    assert meta["config_hash"] == config_hash(BASE_CONFIG)
    assert meta["resolved"]["n_max"] == 10


def test_cli_missing_block_no_output(tmp_path):
    cfg = {k: v for k, v in BASE_CONFIG.items() if k != "rabi"}
    path = write_config(tmp_path, cfg)
    out = tmp_path / "should_not_exist.csv"
    result = CliRunner().invoke(
        main, ["rabi", "--config", path, "--out", str(out)])
    assert result.exit_code != 0
    assert "rabi" in result.output
    assert not out.exists()


def test_cli_schema_violation(tmp_path):
    cfg = json.loads(json.dumps(BASE_CONFIG))
    cfg["model"]["alpha"] = -1.0
    path = write_config(tmp_path, cfg)
    result = CliRunner().invoke(main, ["rabi", "--config", path])
    assert result.exit_code != 0
    assert "model" in result.output


def test_cli_parse_error_reports_location(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"experiment": "rabi",,}')
    result = CliRunner().invoke(main, ["rabi", "--config", str(path)])
    assert result.exit_code != 0
    assert "line" in result.output


def test_cli_subcommand_mismatch(tmp_path):
    path = write_config(tmp_path, BASE_CONFIG)
    result = CliRunner().invoke(main, ["fractal", "--config", path])
    assert result.exit_code != 0
    assert "subcommand" in result.output


def test_run_identical_configs_identical_outputs(tmp_path):
    cfg = json.loads(json.dumps(BASE_CONFIG))
    cfg["output"] = {"format": "json"}
    p1 = run(cfg, out_path=str(tmp_path / "a.json"))
    p2 = run(cfg, out_path=str(tmp_path / "b.json"))
    a = read_json(p1)
    b = read_json(p2)
    assert a == b
