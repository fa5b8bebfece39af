"""Command-line behavior: config parsing and diagnostics, exit codes,
output files, environment overrides, order refitting."""

import io
import json
import math

import pytest

import spderk.cli as cli
from spderk.errors import ConfigError
from spderk.experiments import ErrorRow, ErrorTable, StudyConfig
from spderk.cli import (
    check_order_bands,
    config_from_dict,
    config_to_dict,
    load_config,
    run_cli,
)


def _write_config(tmp_path, name="study.json", **overrides):
    data = dict(problem="example1", N=8, M_list=[4, 8, 16], realizations=3,
                schemes=["erkm15", "exe"], seed=5, out_dir=str(tmp_path / "out"))
    data.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=1))
    return path


def _run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli(argv, out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def _power_table(scheme, gamma, M_values=(4, 8, 16)):
    rows = tuple(
        ErrorRow(scheme, M, 1.0 / M, 2.0 * (1.0 / M) ** gamma, 0.0, 0)
        for M in M_values
    )
    return ErrorTable(rows)


def test_study_end_to_end(tmp_path):
    cfg_path = _write_config(tmp_path)
    code, out, err = _run(["study", str(cfg_path), "--workers", "1"])
    assert code == 0, err
    out_dir = tmp_path / "out"
    table_file = out_dir / "example1_errors.csv"
    meta_file = out_dir / "example1_meta.json"
    assert table_file.exists() and meta_file.exists()
    assert "example1_errors.csv" in out

    with open(table_file) as fh:
        table = ErrorTable.read_csv(fh)
    assert len(table.rows) == 6  # 2 schemes x 3 M values
    assert table.schemes() == ["erkm15", "exe"]

    # the metadata echo re-parses to an equivalent config
    meta = json.loads(meta_file.read_text())
    echoed = config_from_dict(meta["config"]).validated()
    assert echoed == load_config(str(cfg_path)).validated()
    assert meta["seed"] == 5
    assert "numpy" in meta["versions"]

    # same config + seed: byte-identical outputs
    before = table_file.read_bytes(), meta_file.read_bytes()
    code, _, _ = _run(["study", str(cfg_path), "--workers", "1"])
    assert code == 0
    assert (table_file.read_bytes(), meta_file.read_bytes()) == before


def test_env_overrides(tmp_path, monkeypatch):
    cfg_path = _write_config(tmp_path)
    other = tmp_path / "elsewhere"
    monkeypatch.setenv("SPDERK_SEED", "9")
    monkeypatch.setenv("SPDERK_OUT_DIR", str(other))
    code, out, err = _run(["study", str(cfg_path)])
    assert code == 0, err
    meta = json.loads((other / "example1_meta.json").read_text())
    assert meta["seed"] == 9
    monkeypatch.setenv("SPDERK_SEED", "not-a-number")
    code, _, err = _run(["study", str(cfg_path)])
    assert code == 1 and "SPDERK_SEED" in err


def test_config_diagnostics(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "problem": "example1",\n  "bogus": 1\n}\n')
    code, _, err = _run(["study", str(bad)])
    assert code == 1
    assert "bogus" in err and "line 3" in err

    bad.write_text('{\n  "problem": "example1",\n')
    code, _, err = _run(["study", str(bad)])
    assert code == 1 and "line" in err

    bad.write_text("[1, 2]")
    code, _, err = _run(["study", str(bad)])
    assert code == 1 and "top level" in err

    bad.write_text('{"N": 8}')
    code, _, err = _run(["study", str(bad)])
    assert code == 1 and "problem" in err

    code, _, err = _run(["study", str(tmp_path / "missing.json")])
    assert code == 1

    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))


def test_usage_errors():
    code, _, _ = _run(["frobnicate"])
    assert code == 1
    code, _, _ = _run([])
    assert code == 1
    code, _, _ = _run(["--help"])
    assert code == 0


def test_config_round_trip_helpers():
    cfg = StudyConfig("example2", N=8, M_list=(4, 8), realizations=2,
                      schemes=({"name": "erkm15", "c": [1.0] * 7}, "ewp"),
                      reference={"mode": "ewp", "M": 16}, seed=3).validated()
    again = config_from_dict(config_to_dict(cfg)).validated()
    assert again == cfg


def test_order_subcommand(tmp_path):
    table_path = tmp_path / "t.csv"
    with open(table_path, "w") as fh:
        _power_table("erkm15", 1.5).write_csv(fh)
    code, out, _ = _run(["order", str(table_path)])
    assert code == 0
    assert "erkm15: fitted order 1.500" in out

    table_path.write_text("junk\n")
    code, _, err = _run(["order", str(table_path)])
    assert code == 1 and "header" in err


def test_path_subcommand(tmp_path):
    cfg_path = _write_config(tmp_path, M_list=[4], schemes=["exe"])
    code, out, err = _run(["path", str(cfg_path)])
    assert code == 0, err
    lines = out.strip().splitlines()
    assert lines[0] == "step,mode,dB,I"
    assert len(lines) == 1 + 4  # M=4 steps, K=1 mode
    code2, out2, _ = _run(["path", str(cfg_path), "--realization", "1"])
    assert code2 == 0 and out2 != out


def test_selftest_subcommand():
    code, out, err = _run(["selftest"])
    assert code == 0, err
    lines = [ln for ln in out.splitlines() if ln]
    assert len(lines) >= 10
    assert all(ln.endswith(": ok") for ln in lines)


def test_assert_orders(tmp_path, monkeypatch):
    cfg_path = _write_config(tmp_path, schemes=["erkm15"])

    monkeypatch.setattr(cli, "run_study", lambda cfg, workers=None: _power_table("erkm15", 1.5))
    code, out, _ = _run(["study", str(cfg_path), "--assert-orders"])
    assert code == 0 and "order assertions passed" in out

    monkeypatch.setattr(cli, "run_study", lambda cfg, workers=None: _power_table("erkm15", 0.2))
    code, _, err = _run(["study", str(cfg_path), "--assert-orders"])
    assert code == 2 and "outside" in err


def test_check_order_bands_details():
    cfg = StudyConfig("example1", N=8, M_list=(4, 8, 16), realizations=2,
                      schemes=("erkm15", "lie")).validated()
    table = _power_table("erkm15", 1.5)
    breaches = check_order_bands(cfg, table)
    # erkm15 fits inside its band; lie has no rows at all
    assert len(breaches) == 1 and "lie" in breaches[0]

    cfg3 = StudyConfig("example3", N=8, M_list=(4, 8, 16), realizations=2,
                       schemes=("erkm15", "lie"),
                       reference={"mode": "ewp", "M": 16}).validated()
    # example3 only bands the 1.5-order schemes; lie is not asserted
    assert check_order_bands(cfg3, _power_table("erkm15", 1.6)) == []
