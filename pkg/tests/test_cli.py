from __future__ import annotations

import csv
import json
import math
import shutil
import subprocess
import sys
from importlib.resources import files
from pathlib import Path

import numpy as np
import pytest

from momentde.cli import dumps, run

FIXTURES = Path(str(files("momentde") / "fixtures"))


def fx(*parts: str) -> str:
    return str(FIXTURES.joinpath(*parts))


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def stderr_json(capsys) -> dict:
    return json.loads(capsys.readouterr().err)["error"]


def test_solve_exp_csv(tmp_path):
    out = tmp_path / "y.csv"
    assert run(["solve", "--problem", fx("solve", "exp.json"), "--order", "32", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 33
    for row in rows:
        p = int(row["degree"])
        assert row["component"] == "1"
        assert float(row["re"]) == pytest.approx(1 / math.factorial(p), rel=1e-14)
        assert float(row["im"]) == 0
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["assumption_path"] == "A" and side["residual_ok"]


def test_solve_sidecar_certificates(tmp_path):
    out = tmp_path / "y.csv"
    assert run(["solve", "--problem", fx("solve", "geometric_factor_gamma_half.json"), "--out", str(out)]) == 0
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["assumption_path"] == "B"
    assert side["radius_guaranteed"] == pytest.approx(1 / (1 / math.gamma(1.5) + 1 / 2), rel=1e-12)


def test_sys2eq_golden(capsys):
    assert run(["transform", "sys2eq", "--problem", fx("sys2eq", "reducible3x3.json")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert np.allclose(np.array(rep["cyclic_vector"])[:, 0], [1, 2, 1])
    last = [np.array(entry)[:, 0] for entry in rep["last_row"]]
    for got, want in zip(last, [[-432, -1296], [36, 108], [12, -6]]):
        assert np.allclose(got, want, atol=1e-9)


def test_sys2eq_explicit_vector_flag(capsys):
    argv = ["transform", "sys2eq", "--problem", fx("sys2eq", "reducible3x3.json"), "--cyclic-vector", "1,2,1"]
    assert run(argv) == 0
    rep = json.loads(capsys.readouterr().out)
    assert np.allclose(np.array(rep["krylov_basis"])[..., 0], [[1, 2, 1], [0, 20, 4], [-72, 72, 144]])


def test_eq2sys(capsys):
    assert run(["transform", "eq2sys", "--problem", fx("eq2sys", "third_order.json")]) == 0
    rep = json.loads(capsys.readouterr().out)
    last = [np.array(entry)[:, 0] for entry in rep["last_row"]]
    for got, want in zip(last, [[-432, -1296], [36, 108], [12, -6]]):
        assert np.allclose(got, want)


def test_sequence_check_gamma_half(capsys):
    assert run(["sequence-check", "--spec", fx("sequence", "gamma_half.json"), "--max-p", "100"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["assumption_A"] is False and rep["assumption_B"] is True
    assert rep["alpha"] == 0.5 and rep["path"] == "B"


@pytest.mark.parametrize(
    "name", ["factorial.json", "gevrey2.json", "q_gevrey2.json", "custom_table.json"]
)
def test_sequence_check_fixtures(name, capsys):
    assert run(["sequence-check", "--spec", fx("sequence", name), "--max-p", "16"]) == 0
    assert "path" in json.loads(capsys.readouterr().out)


def test_const_solve_and_alias(tmp_path, capsys):
    out = tmp_path / "y.csv"
    assert run(["const", "solve", "--problem", fx("const", "cosh.json"), "--out", str(out)]) == 0
    rep = json.loads(out.with_suffix(".json").read_text())
    assert rep["passed"]
    cs = sorted(c["c"][0] for c in rep["coefficients"])
    assert cs == pytest.approx([0.5, 0.5], abs=1e-14)
    for name in ("double_root.json", "zero_roots.json", "two_roots_gevrey.json"):
        assert run(["const-solve", "--problem", fx("const", name)]) == 0
        assert json.loads(capsys.readouterr().out)["passed"]


def test_delta_e(capsys):
    assert run(["delta-e", "--problem", fx("delta_e", "mittag_leffler_half.json")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["order_type"]["rho_hat"] == pytest.approx(2, abs=0.2)
    assert run(["delta-e", "--problem", fx("delta_e", "exp.json"), "--order", "20"]) == 0
    rep = json.loads(capsys.readouterr().out)
    coeffs = np.array(rep["coefficients"])[:, 0]
    assert np.allclose(coeffs, [1 / math.factorial(p) for p in range(21)], rtol=1e-14)


def test_frac_verify_and_alias(capsys):
    assert run(["frac", "verify", "--alpha", "1/3", "--order", "16"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["passed"] and rep["alpha"] == "1/3"


@pytest.mark.parametrize(
    "argv",
    [
        ["frac-verify", "--alpha", "3/2"],
        ["frac-verify", "--alpha", "abc"],
        ["solve", "--problem", "/nonexistent.json"],
        ["solve", "--order", "0", "--problem", "x.json"],
        ["nope"],
        [],
    ],
)
def test_validation_exit_code(argv, capsys):
    assert run(argv) == 2


def test_unknown_field_reports_location(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"sequence": {"kind": "gamma_moment", "alpah": "1/2"}}))
    assert run(["sequence-check", "--spec", str(bad)]) == 2
    err = stderr_json(capsys)
    assert err["type"] == "ValidationError"
    assert any(e["loc"] == "sequence.alpah" for e in err["details"]["errors"])


def test_invalid_json_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"A": [1, 2,]}')
    assert run(["transform", "sys2eq", "--problem", str(bad)]) == 2
    assert "line" in stderr_json(capsys)["details"]


@pytest.mark.parametrize(
    "argv, kind",
    [
        (["transform", "sys2eq", "--problem", fx("sys2eq", "no_cyclic.json")], "NoCyclicVectorError"),
        (
            ["transform", "sys2eq", "--problem", fx("sys2eq", "reducible3x3.json"), "--cyclic-vector", "0,1,0"],
            "ConditionViolationError",
        ),
    ],
)
def test_math_failure_exit_code(argv, kind, capsys):
    assert run(argv) == 3
    err = stderr_json(capsys)
    assert err["type"] == kind and err["message"]


def test_condition_violation_names_first_pair(capsys):
    argv = ["transform", "sys2eq", "--problem", fx("sys2eq", "reducible3x3.json"), "--cyclic-vector", "0,1,0"]
    run(argv)
    details = stderr_json(capsys)["details"]
    assert (details["j"], details["p"]) == (0, 1)


def test_tolerance_scale_env_invalid(monkeypatch, capsys):
    monkeypatch.setenv("MDE_TOLERANCE_SCALE", "zero")
    assert run(["solve", "--problem", fx("solve", "exp.json")]) == 2


def test_outputs_are_byte_identical(tmp_path):
    for k in range(2):
        d = tmp_path / str(k)
        d.mkdir()
        assert run(["solve", "--problem", fx("solve", "forced_2x2.json"), "--out", str(d / "y.csv")]) == 0
        assert run(["transform", "sys2eq", "--problem", fx("sys2eq", "reducible3x3.json"), "--out", str(d / "t.json")]) == 0
        assert run(["frac-verify", "--alpha", "2/5", "--order", "12", "--out", str(d / "f.json")]) == 0
    for name in ("y.csv", "y.json", "t.json", "f.json"):
        assert (tmp_path / "0" / name).read_bytes() == (tmp_path / "1" / name).read_bytes()


def test_json_formatting():
    text = dumps({"b": -0.0, "a": [complex(0.1, -0.0), float("nan"), 1 / 3]})
    assert text.index('"a"') < text.index('"b"')
    data = json.loads(text)
    assert data == {"a": [[0.1, 0.0], None, 1 / 3], "b": 0.0}
    assert "-0.0" not in text and "0.3333333333333333" in text


def test_batch_mode(tmp_path, capsys):
    src = tmp_path / "in"
    shutil.copytree(FIXTURES / "solve", src)
    out = tmp_path / "out"
    assert run(["solve", "--batch", str(src), "--out", str(out), "--workers", "2"]) == 0
    summary = json.loads(capsys.readouterr().out)["results"]
    assert set(summary) == {p.name for p in src.glob("*.json")}
    assert all(r["exit"] == 0 for r in summary.values())
    for p in src.glob("*.json"):
        assert (out / (p.stem + ".csv")).exists() and (out / (p.stem + ".json")).exists()


def test_batch_mode_reports_worst_exit(tmp_path, capsys):
    src = tmp_path / "in"
    src.mkdir()
    shutil.copy(FIXTURES / "solve" / "exp.json", src / "good.json")
    (src / "bad.json").write_text('{"sequence": {"kind": "factorial"}}')
    assert run(["solve", "--batch", str(src), "--out", str(tmp_path / "out")]) == 2
    summary = json.loads(capsys.readouterr().out)["results"]
    assert summary["good.json"]["exit"] == 0 and summary["bad.json"]["exit"] == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "momentde.cli", "frac-verify", "--alpha", "1/2", "--order", "8"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["passed"]
    proc = subprocess.run(
        [sys.executable, "-m", "momentde.cli", "transform", "sys2eq", "--problem", fx("sys2eq", "no_cyclic.json")],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 3 and json.loads(proc.stderr)["error"]["type"] == "NoCyclicVectorError"
