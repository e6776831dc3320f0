import json

import numpy as np

from normsubgrad.traceio import dumps, jsonable, read_trace_csv, write_trace_csv
from normsubgrad.problems import abs1d
from normsubgrad.schedules import constant_horizon
from normsubgrad.solvers import SolverConfig, run


def test_jsonable_handles_numpy_and_nonfinite():
    doc = jsonable({"a": np.float64(1.5), "b": np.arange(3), "c": float("inf"), 1: np.bool_(True)})
    assert doc == {"a": 1.5, "b": [0, 1, 2], "c": None, "1": True}


def test_dumps_is_key_sorted():
    text = dumps({"b": 1, "a": 0.1})
    assert list(json.loads(text)) == ["a", "b"] and text.endswith("\n")


def test_trace_csv_round_trip(tmp_path):
    tr = run(abs1d(), SolverConfig("subgrad", constant_horizon(1.0, 3)), [2.0])
    write_trace_csv(tmp_path / "t.csv", tr)
    rows = read_trace_csv(tmp_path / "t.csv")
    assert [float(r["f"]) for r in rows] == [2.0, 1.5, 1.0, 0.5, 0.0]
    assert rows[-1]["beta"] == "" and rows[0]["envelope_grad_norm"] == ""
    assert not list(tmp_path.glob("*.tmp"))
