"""
Unit tests for atomic table writers and the resumable run ledger.
"""

import json

import pytest

from artifacts import (
    RunLedger,
    write_csv_atomic,
    write_json_atomic,
    write_sweep_csv,
    write_trajectory_csv,
)
from montecarlo import SweepRow, SweepTable
from pilot_wave import TrajectorySample

pytestmark = pytest.mark.unit


def _record(index, spec_hash="h1"):
    return {"spec_hash": spec_hash, "run_index": index, "seed": index, "X_A": 1, "X_B": -1}


def test_csv_cells_use_lowercase_booleans_and_repr_floats(temp_out_dir):
    path = write_csv_atomic(temp_out_dir / "t.csv", ["a", "b", "c"], [{"a": True, "b": 0.1, "c": 3}])
    assert path.read_text(encoding="utf-8") == "a,b,c\ntrue,0.1,3\n"
    assert not list(temp_out_dir.glob("*.tmp"))


def test_json_atomic_is_sorted(temp_out_dir):
    path = write_json_atomic(temp_out_dir / "nested" / "x.json", {"b": 1, "a": 2})
    assert path.read_text(encoding="utf-8").index('"a"') < path.read_text(encoding="utf-8").index('"b"')
    assert json.loads(path.read_text(encoding="utf-8")) == {"a": 2, "b": 1}


def test_sweep_csv_marks_unconverged_rows(temp_out_dir):
    """Test unconverged cells are written with converged=false."""
    table = SweepTable("delta_lambda", [SweepRow(0.5, 100, 0.25, 0.05, 64, 2, False, "max_runs")])
    path = write_sweep_csv(temp_out_dir / "sweep.csv", table, "abc", "0.3.0")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("sweep_var,t_m,m_hat")
    assert lines[1] == "0.5,100,0.25,0.05,64,2,false,max_runs,abc,0.3.0"


def test_trajectory_csv_carries_provenance(temp_out_dir):
    """Test every trajectory row names the config hash and tool version."""
    samples = [TrajectorySample(0.0, 0.5, 0.0, 5.5, 0.0), TrajectorySample(0.025, 0.51, 0.4, 5.49, -0.4)]
    path = write_trajectory_csv(temp_out_dir / "trajectory.csv", samples, "abc", "0.3.0")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,x_A,v_A,x_B,v_B,config_hash,tool_version"
    assert lines[1] == "0.0,0.5,0.0,5.5,0.0,abc,0.3.0"
    assert lines[2].endswith(",abc,0.3.0")


def test_ledger_round_trip_and_resume(temp_out_dir):
    """Test records written by one ledger are found by a resumed one."""
    path = temp_out_dir / "runs.jsonl"
    ledger = RunLedger(path)
    ledger.write_header({"k": 1}, "cfg", "0.3.0", "chsh")
    ledger.append_many([_record(0), _record(1)])
    ledger.append(_record(0, "h2"))

    resumed = RunLedger(path, resume=True)
    assert len(resumed) == 3
    assert resumed.get("h1", 1)["X_B"] == -1
    assert resumed.get("h1", 2) is None
    assert resumed.get("h2", 0)["spec_hash"] == "h2"

    lines = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
    assert lines[0]["type"] == "header"
    assert lines[0]["command"] == "chsh"
    assert [r["type"] for r in lines[1:]] == ["run"] * 3


def test_resume_skips_truncated_line(temp_out_dir):
    """Test a partially written line from an interrupted session is ignored."""
    path = temp_out_dir / "runs.jsonl"
    RunLedger(path).append(_record(0))
    with open(path, "a", encoding="utf-8") as f:
        f.write('{"type": "run", "spec_hash": "h1", "run_')
    resumed = RunLedger(path, resume=True)
    assert len(resumed) == 1


def test_fresh_ledger_replaces_old_file(temp_out_dir):
    path = temp_out_dir / "runs.jsonl"
    RunLedger(path).append(_record(0))
    fresh = RunLedger(path, resume=False)
    assert len(fresh) == 0
    assert not path.exists()
