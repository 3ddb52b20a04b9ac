import json

import pytest

from charlierbd.cli import main


@pytest.fixture
def cfg_path(tmp_path):
    cfg = {"model": {"kind": "erlang_a",
                     "lambda": {"base": 6.0, "amplitude": 1.0},
                     "mu": 1.0, "beta": 0.5, "c": 4},
           "T": 2.0, "init": {"kind": "poisson", "value": 5.0},
           "orders": [1, 2], "X_max": 60, "n_paths": 300}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def test_validate_ok(cfg_path, capsys):
    assert main(["validate", str(cfg_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    head = json.loads(lines[0])
    assert head["config_ok"] and head["kind"] == "erlang_a"
    assert all(line.endswith("pass") for line in lines[1:])
    assert len(lines) == 5


def test_validate_without_config(capsys):
    assert main(["validate"]) == 0
    out = capsys.readouterr().out
    assert "orthonormality: pass" in out


def test_malformed_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["validate", str(bad)]) == 2


def test_missing_file_exits_2(tmp_path):
    assert main(["validate", str(tmp_path / "nope.json")]) == 2


def test_unknown_subcommand_exits_2():
    assert main(["frobnicate"]) == 2


def test_table_writes_csv(cfg_path, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["table", str(cfg_path), "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "N,err_mean,err_variance,err_skewness,err_kurtosis"
    assert len(lines) == 4


def test_solve_reference_and_closure(cfg_path, tmp_path):
    ref = tmp_path / "ref.csv"
    assert main(["solve-reference", str(cfg_path), "-o", str(ref)]) == 0
    assert ref.read_text().startswith("t,mean,variance")
    clo = tmp_path / "clo.csv"
    assert main(["solve-closure", str(cfg_path), "--order", "first",
                 "-o", str(clo)]) == 0
    assert clo.exists()


def test_simulate(cfg_path, tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["simulate", str(cfg_path), "--paths", "200",
                 "--dt-out", "0.5", "-o", str(out)]) == 0
    assert out.read_text().startswith("t,mean,variance,se_mean")


def test_galerkin_needs_order(cfg_path, tmp_path):
    assert main(["solve-galerkin", str(cfg_path)]) == 2
    out = tmp_path / "g.csv"
    assert main(["solve-galerkin", str(cfg_path), "-N", "3",
                 "-o", str(out)]) == 0
    assert out.exists()
