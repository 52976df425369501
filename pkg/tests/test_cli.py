import csv
import json

import numpy as np
import pytest

from rtlc.cli import (
    DEFAULT_SWEEP,
    DENSE_HEADER,
    SUMMARY_KEYS,
    TRAJ_HEADER,
    UsageError,
    main,
    parse_run_spec,
)


def _read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_parse_long_horizon_rtlc():
    spec = parse_run_spec(["--method", "rtlc", "--delta-t", "0.85", "--dt", "0.1"])
    assert spec.mode == "run"
    assert spec.config.method == "rtlc"
    assert spec.config.params.delta_t == 0.85 and spec.config.params.dt == 0.1


def test_parse_defaults(params):
    spec = parse_run_spec([])
    assert spec.config.method == "rtlc"
    assert spec.config.params == params
    assert spec.config.x0 == (24.0, 90.0)
    assert spec.config.horizon == 30.0 and spec.config.substeps == 10
    assert spec.sweep_deltas == DEFAULT_SWEEP
    assert not spec.timing


@pytest.mark.parametrize("argv", [
    ["--dt", "0.2", "--delta-t", "0.1"],
    ["--bogus"],
    ["--method", "mpc"],
    ["--sweep", "0.1:0.2", "--mode", "sweep"],
    ["--sweep", "0.1", "--mode", "sweep"],
    ["--horizon", "-1"],
])
def test_usage_errors(argv):
    with pytest.raises(UsageError):
        parse_run_spec(argv)


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"method": "tlc", "delta_t": 0.5, "dt": 0.5, "mass": 1500.0,
                               "x_lower": [0.2, 0.3], "x0": {"v": 20.0, "z": 70.0}}))
    spec = parse_run_spec(["--config", str(cfg), "--method", "hocbf"])
    assert spec.config.method == "hocbf"
    assert spec.config.params.mass == 1500.0 and spec.config.params.delta_t == 0.5
    assert spec.config.params.region.x_lower.tolist() == [0.2, 0.3]
    assert spec.config.x0 == (20.0, 70.0)
    via_arg = parse_run_spec([], config_file=str(cfg))
    assert via_arg.config.method == "tlc"


@pytest.mark.parametrize("content", ["{not json", "[1, 2]", '{"speed": 3}'])
def test_malformed_config(tmp_path, content):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(content)
    with pytest.raises(UsageError):
        parse_run_spec(["--config", str(cfg)])


def test_exit_code_usage(capsys):
    assert main(["--dt", "0.2", "--delta-t", "0.1"]) == 2
    assert "usage error" in capsys.readouterr().err


def test_single_interval_run(tmp_path, capsys):
    assert main(["--method", "tlc", "--horizon", "0.1", "--out", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / "tlc.csv")
    assert rows[0] == TRAJ_HEADER
    controls = [r for r in rows[1:] if r[TRAJ_HEADER.index("u")] != ""]
    assert len(rows) == 3 and len(controls) == 1
    assert "Time-driven TLC" in capsys.readouterr().out


def test_compare_outputs(tmp_path):
    assert main(["--mode", "compare", "--horizon", "6", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert [rec["method"] for rec in summary] == ["hocbf", "tlc", "etlc", "rtlc"]
    for rec in summary:
        assert list(rec) == SUMMARY_KEYS
        assert rec["mean_solve_time_s"] is None
        rows = _read_csv(tmp_path / f"{rec['method']}.csv")
        assert len(rows) - 1 == 6 / 0.1 + 1
        assert all(r[-1] == "" for r in rows[1:])
        dense = _read_csv(tmp_path / f"{rec['method']}_dense.csv")
        assert dense[0] == DENSE_HEADER
        h_sub = np.array([float(r[1]) for r in dense[1:]])
        assert len(h_sub) == 10 * 60 + 1
        assert abs(rec["min_h"] - h_sub.min()) <= 1e-12


def test_sweep_outputs(tmp_path):
    assert main(["--mode", "sweep", "--horizon", "2", "--sweep", "0.85:0.1,0.5:0.5",
                 "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert [(r["delta_t"], r["dt"]) for r in summary] == [(0.85, 0.1), (0.5, 0.5)]
    assert (tmp_path / "rtlc_dt0.85_0.1.csv").exists()
    assert (tmp_path / "rtlc_dt0.5_0.5_dense.csv").exists()


def test_timing_flag_writes_times(tmp_path):
    assert main(["--horizon", "1", "--timing", "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "summary.json").read_text())[0]
    assert rec["mean_solve_time_s"] > 0
    rows = _read_csv(tmp_path / "rtlc.csv")
    assert float(rows[1][-1]) >= 0


def test_reruns_are_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["--mode", "compare", "--horizon", "3", "--out", str(out)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]


def test_simulation_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"x0": [1e200, 90.0]}))
    assert main(["--config", str(cfg), "--horizon", "0.1", "--out", str(tmp_path / "o")]) == 1
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary[0]["min_h"] is None and "error" in summary[0]
