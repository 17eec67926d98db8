from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from singular_traces import Coupling, Geometry, trace_formula
from singular_traces import cli
from singular_traces.errors import NumericError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_trace_zero_coupling(capsys):
    code, out, _ = run(capsys, "trace", "--formula", "delta-vs-free", "--dim", "2", "--radius", "1",
                       "--alpha", "0", "--m", "1", "--lambda", "-2")
    assert code == 0
    assert json.loads(out)["result"]["value"] == 0.0


def test_trace_json_schema_and_bit_exact_round_trip(capsys):
    code, out, _ = run(capsys, "trace", "--formula", "delta-vs-free", "--dim", "2", "--radius", "1",
                       "--alpha", "0.8", "--m", "1", "--lambda", "-2", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {"request", "result", "diagnostics"}
    assert {"value", "modes_used", "tail_bound", "converged"} <= set(doc["result"])
    assert {"modes_used", "tail_bound", "wall_time_ms"} == set(doc["diagnostics"])
    direct = trace_formula("delta_vs_free", Geometry(2, 1.0), Coupling("delta", 0.8), 1, -2.0)
    assert doc["result"]["value"] == direct.value
    assert doc["result"]["tail_bound"] == direct.tail_bound
    assert json.loads(json.dumps(doc)) == doc


def test_trace_class_violation_exits_2(capsys):
    code, out, err = run(capsys, "trace", "--formula", "deltaprime-vs-free", "--dim", "3", "--m", "1",
                         "--omega", "1", "--lambda", "-1")
    assert code == 2 and out == ""
    assert "m > (d-1)/2" in err


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "trace", "--formula", "delta-vs-free", "--lambda", "-1")[0] == 2   # no --alpha
    assert run(capsys, "trace", "--formula", "nonsense", "--lambda", "-1")[0] == 2
    assert run(capsys, "trace", "--alpha", "2", "--lambda", "-1")[0] == 2             # not below spectrum
    assert run(capsys, "trace", "--alpha", "1", "--lambda", "-1", "--mode-cap", "lots")[0] == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["trace", "--dim", "5", "--lambda", "-1"])
    assert info.value.code == 2


def test_non_converged_exits_3(capsys):
    code, out, err = run(capsys, "trace", "--formula", "neumann-vs-free", "--lambda", "-1",
                         "--mode-cap", "30")
    assert code == 3
    assert json.loads(out)["result"]["converged"] is False
    assert "not converged" in err


def test_numeric_failure_exits_4(capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise NumericError("synthetic failure")
    monkeypatch.setattr(cli, "trace_formula", boom)
    code, _, err = run(capsys, "trace", "--alpha", "1", "--lambda", "-2")
    assert code == 4 and "synthetic failure" in err


def test_human_format(capsys):
    code, out, _ = run(capsys, "trace", "--alpha", "0.8", "--lambda", "-2", "--format", "human")
    assert code == 0 and "value: 0.26148895" in out


def test_determinism(capsys):
    argv = ["trace", "--formula", "deltaprime-vs-neumann", "--omega", "-0.7", "--m", "2", "--lambda", "-3"]
    first = run(capsys, *argv, "--no-timing")[1]
    assert first == run(capsys, *argv, "--no-timing")[1]
    a, b = json.loads(run(capsys, *argv)[1]), json.loads(run(capsys, *argv)[1])
    a["diagnostics"].pop("wall_time_ms"), b["diagnostics"].pop("wall_time_ms")
    assert a == b


def test_verify_defaults_pass(capsys):
    code, out, _ = run(capsys, "verify", "--no-timing")
    doc = json.loads(out)["result"]
    assert code == 0 and doc["pass"] and doc["rel_gap"] <= 5e-3


def test_verify_zero_coupling_and_failure_code(capsys):
    code, out, _ = run(capsys, "verify", "--alpha", "0", "--grid-points", "1000", "--r-max", "20",
                       "--oracle-mode-cap", "20")
    doc = json.loads(out)["result"]
    assert code == 0 and doc["engine"] == 0.0 and doc["oracle"] == 0.0
    code, out, _ = run(capsys, "verify", "--grid-points", "1000", "--r-max", "20",
                       "--oracle-mode-cap", "20", "--tol", "1e-9")
    assert code == 1 and json.loads(out)["result"]["pass"] is False


def test_verify_identity(capsys):
    code, out, _ = run(capsys, "verify", "--identity", "deltaprime-split", "--omega", "0.5",
                       "--lambda", "-4", "--dim", "3", "--m", "2")
    doc = json.loads(out)["result"]
    assert code == 0 and doc["pass"] and doc["rel_gap"] <= 1e-10


def test_eigs(capsys):
    code, out, _ = run(capsys, "eigs", "--model", "delta", "--alpha", "-1")
    assert code == 0 and "(no rows)" in out
    code, out, _ = run(capsys, "eigs", "--model", "delta", "--alpha", "2", "--dim", "2",
                       "--modes", "0..5", "--format", "json")
    rows = json.loads(out)["result"]["rows"]
    assert code == 0 and rows[0]["mode"] == 0
    code, out, _ = run(capsys, "eigs", "--model", "delta", "--alpha", "2", "--modes", "0..1",
                       "--cross-check", "--grid-points", "2000", "--r-max", "20", "--format", "json")
    rows = json.loads(out)["result"]["rows"]
    assert rows[0]["gap"] < 1e-3 and rows[0]["oracle_count"] == 1


def test_eigs_bad_range_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["eigs", "--alpha", "1", "--modes", "a..b"])
    assert info.value.code == 2


@pytest.mark.parametrize("which,k,expected,tol", [("m-tilde", 0, -1.0, 0.05), ("m-tilde", 1, -3.0, 0.1),
                                                  ("m-hat", 0, -1.0, 0.05)])
def test_decay(capsys, which, k, expected, tol):
    code, out, _ = run(capsys, "decay", "--which", which, "--k", str(k), "--dim", "2",
                       "--n", "100..1000", "--format", "json")
    assert code == 0
    assert abs(json.loads(out)["result"]["exponent"] - expected) <= tol


def test_sweep_csv(capsys):
    code, out, _ = run(capsys, "sweep", "--formula", "delta-vs-free", "--alpha", "0.8",
                       "--lambda-from", "-10", "--lambda-to", "-0.5", "--steps", "100")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 100
    vals = [abs(float(r["value"])) for r in rows]
    assert all(a < b for a, b in zip(vals, vals[1:]))   # |value| shrinks as lam -> -inf


def test_sweep_empty_and_flagged_rows(capsys):
    code, out, _ = run(capsys, "sweep", "--alpha", "1", "--steps", "0")
    assert code == 0 and out == ""
    code, out, _ = run(capsys, "sweep", "--formula", "neumann-vs-free", "--steps", "3",
                       "--mode-cap", "30", "--format", "json")
    rows = json.loads(out)["result"]["rows"]
    assert code == 3 and not any(r["converged"] for r in rows)
    code, out, _ = run(capsys, "sweep", "--alpha", "2", "--lambda-from", "-4", "--lambda-to", "-0.5",
                       "--steps", "4")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 2
    assert rows[0]["error"] == "" and "not below the spectrum" in rows[-1]["error"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "singular_traces", "trace", "--alpha", "0",
                           "--lambda", "-2", "--no-timing"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["value"] == 0.0
