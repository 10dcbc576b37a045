import csv
import subprocess
import sys
from pathlib import Path

import pytest

from qtdoa.cli import main

SHIPPED = str(Path(__file__).resolve().parents[1] / "configs" / "testbed.yaml")


def test_simulate_writes_csv(tmp_path, capsys):
    out = tmp_path / "res.csv"
    summ = tmp_path / "sum.csv"
    code = main(["simulate", "--config", SHIPPED, "--eta-grid", "0,0.02", "--trials", "2",
                 "--modes", "quantum", "--seed", "3", "--out", str(out), "--summary", str(summ)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4
    assert {r["mode"] for r in rows} == {"quantum"}
    assert summ.read_text().startswith("eta,mode,trials")
    assert "quantum" in capsys.readouterr().out


def test_solve_one(capsys):
    assert main(["solve-one", "--config", SHIPPED, "--eta", "0.01", "--mode", "classical", "--seed", "4"]) == 0
    out = capsys.readouterr().out
    assert "status            optimal" in out
    assert "x_hat" in out and "error_m" in out


def test_crlb(capsys):
    assert main(["crlb", "--config", SHIPPED, "--eta", "0.02", "--x", "0.5,0.3,-0.7"]) == 0
    out = capsys.readouterr().out
    bound = float(out.split("bound_m")[1].split()[0])
    assert bound == pytest.approx(0.0159123907, rel=1e-8)


def test_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("Dx: 2.0\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "r.csv")]) != 0
    assert "missing required" in capsys.readouterr().err
    assert main(["crlb", "--eta", "0.02", "--x", "1,1,1"]) != 0
    assert main(["crlb", "--eta", "0.02", "--x", "1,1"]) != 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qtdoa", "crlb", "--eta", "0.01", "--x", "0.2,0.4,1.5"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "bound_m" in res.stdout
