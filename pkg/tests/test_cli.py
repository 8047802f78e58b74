import csv
import io
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from qcalc.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_USAGE, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def report(argv, capsys):
    code, out = run(argv, capsys)
    return code, json.loads(out)


def strip_timing(text):
    doc = json.loads(text)
    doc.pop("timing_ms")
    return json.dumps(doc, sort_keys=True)


def test_verify_nilpotency(capsys):
    code, doc = report(["verify", "nilpotency", "--N", "3", "--n", "2", "--trials", "20", "--seed", "1"], capsys)
    assert code == EXIT_OK
    assert doc["command"] == "verify nilpotency"
    assert len(doc["checks"]) == 20 and all(c["status"] == "pass" for c in doc["checks"])
    assert set(doc) >= {"command", "params", "checks", "timing_ms"}


def test_seed_required(capsys):
    assert main(["verify", "nilpotency", "--N", "3", "--n", "2"]) == EXIT_USAGE


def test_dims(capsys):
    code, doc = report(["dims", "--n", "2"], capsys)
    assert code == EXIT_OK and doc["dimension"] == 14


def test_verify_conditions(capsys):
    code, doc = report(["verify", "conditions", "--N", "4", "--n", "2"], capsys)
    assert code == EXIT_OK and len(doc["checks"]) == 14


def test_clifford_verify(capsys):
    code, doc = report(["clifford", "verify", "--p", "2", "--N", "2"], capsys)
    assert code == EXIT_OK


def test_clifford_curvature_from_file(capsys):
    code, doc = report(["clifford", "curvature", "--connection", str(CONFIGS / "pauli_sigma2.toml")], capsys)
    assert code == EXIT_OK
    assert doc["curvature_over_multiplicities"]["11"] == "(1)"


def test_clifford_bianchi_seeded(capsys):
    code, doc = report(["clifford", "bianchi", "--p", "2", "--N", "2", "--seed", "3"], capsys)
    assert code == EXIT_OK and len(doc["checks"]) == 4


def test_dim1_length(capsys):
    code, doc = report(["dim1", "length", "--metric", str(CONFIGS / "euclid2.toml"),
                        "--curve", str(CONFIGS / "circle.toml"), "--from", "0",
                        "--to", "6.283185307179586"], capsys)
    assert code == EXIT_OK
    assert abs(doc["length"] - 6.283185307179586) < 1e-9
    assert doc["tolerance"] == 1e-9 and doc["evaluations"] > 0


def test_dim1_non_positive_metric(tmp_path, capsys):
    g = tmp_path / "g.toml"
    g.write_text('g = [["1", "0"], ["0", "-1"]]\n')
    code, doc = report(["dim1", "length", "--metric", str(g), "--curve", str(CONFIGS / "circle.toml"),
                        "--from", "0", "--to", "1"], capsys)
    assert code == EXIT_FAIL


def test_covariant_tensoriality_config(capsys):
    code, doc = report(["covariant", "tensoriality", "--config", str(CONFIGS / "bundle_shear.toml")], capsys)
    assert code == EXIT_OK


def test_covariant_riemann_reports_printed_mismatch(capsys):
    code, doc = report(["covariant", "riemann", "--n", "2", "--seed", "1"], capsys)
    assert code == EXIT_FAIL
    assert [c["status"] for c in doc["checks"]] == ["fail", "pass"]


def test_geodesic_json_and_csv(tmp_path, capsys):
    cfg = str(CONFIGS / "geodesic.toml")
    code, doc = report(["geodesic", "integrate", "--config", cfg, "--richardson"], capsys)
    assert code == EXIT_OK
    assert 12 <= doc["richardson_ratio"] <= 20
    rows = doc["trajectory"]["rows"]
    out = tmp_path / "traj.csv"
    assert main(["geodesic", "integrate", "--config", cfg, "--format", "csv", "--out", str(out)]) == EXIT_OK
    table = list(csv.reader(io.StringIO(out.read_text())))
    assert table[0] == ["lambda", "x1", "x2", "v1", "v2", "a1", "a2"]
    assert len(table) == len(rows) + 1
    assert [float(v) for v in table[-1]] == rows[-1]


def test_config_errors_exit_three(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("n = [\n")
    assert main(["geodesic", "integrate", "--config", str(bad)]) == EXIT_CONFIG
    missing = tmp_path / "missing.toml"
    assert main(["covariant", "tensoriality", "--config", str(missing)]) == EXIT_CONFIG
    poly = tmp_path / "poly.toml"
    poly.write_text('n = 2\n[gamma]\n"1,1,1" = "x1 +* 2"\n')
    assert main(["covariant", "tensoriality", "--config", str(poly)]) == EXIT_CONFIG
    idx = tmp_path / "idx.toml"
    idx.write_text('n = 2\n[gamma]\n"1,3,1" = "x1"\n')
    assert main(["covariant", "tensoriality", "--config", str(idx)]) == EXIT_CONFIG


def test_usage_errors_exit_two(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["dims"]) == EXIT_USAGE
    assert main(["dims", "--n", "x"]) == EXIT_USAGE
    assert main(["covariant", "riemann"]) == EXIT_USAGE


def test_out_file_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["clifford", "curvature", "--p", "2", "--N", "3", "--seed", "5"]
    assert main(argv + ["--out", str(a)]) == EXIT_OK
    assert main(argv + ["--out", str(b)]) == EXIT_OK
    assert strip_timing(a.read_text()) == strip_timing(b.read_text())
    a.write_text("")
    argv = ["verify", "nilpotency", "--N", "4", "--n", "1", "--seed", "2", "--trials", "5"]
    assert main(argv + ["--out", str(a)]) == EXIT_OK
    assert main(argv + ["--out", str(b)]) == EXIT_OK
    assert strip_timing(a.read_text()) == strip_timing(b.read_text())


@pytest.mark.skipif(shutil.which("qcalc") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["qcalc", "dims", "--n", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["dimension"] == 4


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qcalc.cli", "dims", "--n", "3"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["dimension"] == 32
