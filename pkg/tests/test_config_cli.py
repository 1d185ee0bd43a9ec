import csv
import json

import numpy as np
import pytest

from prandtl_lab.cli import main
from prandtl_lab.config import RunConfig, parse_config, parse_config_text, with_overrides, write_manifest
from prandtl_lab.errors import ValidationError
from prandtl_lab.grid import Field, GridSpec, write_field_csv

SMALL = ["--set", "grid.T=0.25", "--set", "grid.n_t=12", "--set", "grid.n_x=16", "--set", "grid.n_y=64",
         "--set", "schedule.theta0=100", "--quiet"]


def test_minimal_file_gives_defaults():
    cfg = parse_config_text("[grid]\n")
    assert cfg == RunConfig()
    assert cfg.grid() == GridSpec(T=1.0, Y=12.0, n_t=32, n_x=32, n_y=128)
    assert cfg["schedule"]["theta0"] == 10.0 and cfg["solver"]["picard_max"] == 8


def test_errors_name_line_key_and_constraint():
    with pytest.raises(ValidationError, match=r"cfg:3: grid\.n_y = -3 violates constraint >= 8"):
        parse_config_text("[grid]\nT = 1.0\nn_y = -3\n", "cfg")
    with pytest.raises(ValidationError, match=r"cfg:2: unknown key 'bogus'"):
        parse_config_text("[grid]\nbogus = 1\n", "cfg")
    with pytest.raises(ValidationError, match=r"cfg:2: .*wrong type"):
        parse_config_text("[schedule]\nn_max = many\n", "cfg")
    with pytest.raises(ValidationError, match=r"cfg:1: unknown section"):
        parse_config_text("[nope]\n", "cfg")
    with pytest.raises(ValidationError, match="custom_table requires"):
        parse_config_text("[shear]\nprofile = custom_table\n", "cfg")


def test_manifest_round_trip(tmp_path):
    cfg = with_overrides(RunConfig(), ["grid.n_t=12", "norms.track=1,1.0,0.0; 2,0.5,3.0", "solver.track_lambda=true"])
    path = write_manifest(cfg, tmp_path, "run-nash-moser")
    assert parse_config(path) == cfg
    assert "command: run-nash-moser" in path.read_text()


def test_output_directory_honours_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("PRANDTL_LAB_OUTPUT", str(tmp_path))
    assert RunConfig().output_dir() == tmp_path / "runs"


def test_shear_flow_command(tmp_path):
    out = tmp_path / "shear"
    assert main(["shear-flow", "--out", str(out), "--set", "grid.n_t=8", "--set", "grid.n_y=64", "--quiet"]) == 0
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["heat_residual"] < 1e-6 and diag["min_dy"] > 0
    assert (out / "shear.csv").exists() and (out / "manifest.cfg").exists()


def test_compare_of_identical_fields_is_zero(tmp_path, capsys):
    spec = GridSpec(T=1.0, Y=4.0, n_t=5, n_x=4, n_y=17)
    f = Field.from_function(spec, lambda t, x, y: np.sin(x) * y * np.exp(-y) * (1 + t))
    a = write_field_csv(f, tmp_path / "a.csv")
    b = write_field_csv(f, tmp_path / "b.csv")
    assert main(["compare", str(a), str(b), "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["Linf"] == 0 and all(r["A"] == r["C"] == r["D"] == 0 for r in summary["norms"])


def test_nash_moser_with_zero_eps_is_flat(tmp_path):
    out = tmp_path / "nm"
    assert main(["run-nash-moser", "--out", str(out), "--set", "perturbation.eps=0", *SMALL]) == 0
    with open(out / "trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 9 and {float(r["residual"]) for r in rows} == {0.0}


def test_runs_are_deterministic(tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["run-nash-moser", "--out", str(out), "--set", "schedule.n_max=2", *SMALL]) == 0
    assert (outs[0] / "trace.csv").read_text() == (outs[1] / "trace.csv").read_text()
    assert (outs[0] / "u.csv").read_bytes() == (outs[1] / "u.csv").read_bytes()
    replay = parse_config(outs[0] / "manifest.cfg")
    assert replay["schedule"]["n_max"] == 2 and replay["grid"]["n_y"] == 64


def test_exit_codes(tmp_path, capsys):
    assert main(["shear-flow", "--out", str(tmp_path), "--set", "grid.n_y=-3"]) == 1
    assert "grid.n_y" in capsys.readouterr().err
    assert main(["run-oracle", "--out", str(tmp_path / "o"), "--set", "solver.picard_max=1",
                 "--set", "solver.picard_tol=1e-14", *SMALL]) == 2
    assert "PicardError" in capsys.readouterr().err
    missing = tmp_path / "missing.cfg"
    assert main(["shear-flow", "--config", str(missing)]) == 1
