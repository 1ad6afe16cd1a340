import subprocess
import sys

import pytest

from dpa_clt.cli import main
from dpa_clt.io import read_csv, read_json

PSTAR = ["--alpha", "0.5", "--gamma", "0.5", "--lambda", "1", "--mu", "1"]


def test_limits_writes_p01(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["limits", *PSTAR, "--imax", "3", "--jmax", "3", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == ["i", "j", "p"]
    assert [0, 1, 2 / 7] in rows
    assert read_json(tmp_path / "p.diagnostics.json")["rmax"] == 3
    man = read_json(tmp_path / "p.csv.manifest.json")
    assert str(out) in man["outputs"]


def test_enumerate_n2(tmp_path):
    out = tmp_path / "exact.json"
    assert main(["enumerate", *PSTAR, "--n", "2", "--out", str(out)]) == 0
    states = read_json(out)["states"]
    assert len(states) == 2 and [s["prob"] for s in states] == [0.5, 0.5]


def test_missing_alpha_is_usage_error(tmp_path, capsys):
    code = main(["limits", "--lambda", "1", "--mu", "1", "--imax", "1", "--jmax", "1",
                 "--out", str(tmp_path / "p.csv")])
    assert code == 1
    assert "usage:" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        ["limits", *PSTAR],
        ["enumerate", *PSTAR, "--n", "9"],
        ["limits", "--alpha", "0.5", "--gamma", "0.4", "--lambda", "1", "--mu", "1", "--imax", "1", "--jmax", "1"],
        ["verify", *PSTAR, "--n", "100", "--runs", "5"],
        ["xi", *PSTAR, "--target", "0,0"],
    ],
)
def test_validation_errors_exit_1(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1


def test_config_merges_under_flags(tmp_path):
    cfg = tmp_path / "m.cfg"
    cfg.write_text("alpha = 0.3\nlambda = 5\nmu = 1\n")
    out = tmp_path / "xi.csv"
    assert main(["xi", "--config", str(cfg), "--lambda", "1", "--target", "1,0", "--out", str(out)]) == 0
    rows = read_csv(out)[1]
    # xi_00 is forced to zero, xi_10 = 1; the lambda override shows in the boundary row
    assert rows == [[0, 0, 0.0], [1, 0, 1.0]]
    assert main(["xi", "--config", str(cfg), "--target", "2,0", "--out", str(out)]) == 0
    assert read_csv(out)[1][1] == [1, 0, -(5 + 1) / 1]
    assert main(["xi", "--config", str(cfg), "--lambda", "1", "--target", "2,0", "--out", str(out)]) == 0
    assert read_csv(out)[1][1] == [1, 0, -(1 + 1) / 1]


def test_xi_matrix_long_format(tmp_path):
    out = tmp_path / "xm.csv"
    assert main(["xi-matrix", *PSTAR, "--window", "1,1", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == ["i", "j", "k", "l", "xi"]
    assert len(rows) == 9
    assert [1, 1, 0, 1, -1.0] in rows


def test_covariance_json(tmp_path):
    out = tmp_path / "cov.json"
    assert main(["covariance", *PSTAR, "--window", "1,1", "--out", str(out)]) == 0
    d = read_json(out)
    assert d["coords"] == [[0, 1], [1, 0], [1, 1]]
    assert d["final_cov"][0][0] == pytest.approx(24 / 49 / 2.5)
    assert main(["covariance", *PSTAR, "--window", "1,1", "--tail", "truncate", "--out", str(out)]) == 1


def test_simulate_is_reproducible(tmp_path):
    args = ["simulate", *PSTAR, "--n", "2000", "--seed", "8", "--window", "2,1", "--checkpoints", "1000,2000"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "counts.csv").read_bytes()
    assert a == (tmp_path / "b" / "counts.csv").read_bytes()
    rows = read_csv(tmp_path / "a" / "counts.csv")[1]
    assert {r[1] for r in rows} == {1000, 2000}
    assert read_json(tmp_path / "a" / "manifest.json")["seeds"]["seed"] == 8


def test_verify_report_and_qq(tmp_path):
    rep, qq = tmp_path / "r.json", tmp_path / "qq.csv"
    argv = ["verify", *PSTAR, "--n", "2000", "--runs", "100", "--window", "1,1", "--seed", "3",
            "--report", str(rep), "--qq", str(qq)]
    assert main(argv) == 0
    d = read_json(rep)
    assert d["runs"] == 100 and d["seed"] == 3
    assert "workers" not in d
    assert len(read_csv(qq)[1]) == 300


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "dpa_clt.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
