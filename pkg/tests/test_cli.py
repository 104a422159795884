import csv
import json
import subprocess
import sys

import pytest

from magspec import effective
from magspec.cli import main
from magspec.config import RunConfig, parse_pairs
from magspec.errors import ConfigError
from magspec.geometry import ParametricBoundary, profile


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_constants_reference_grid(tmp_path, capsys):
    assert run(tmp_path, "constants") == 0
    out = capsys.readouterr().out
    assert "FAILED" not in out and "M1=0" in out
    doc = json.loads((tmp_path / "constants.json").read_text())
    assert doc["theta0"] == pytest.approx(0.590106, abs=1e-6)
    assert (tmp_path / "manifest.txt").read_text().count("\n") == 2


def test_constants_coarse_grid_fails(tmp_path, capsys):
    assert run(tmp_path, "constants", "--grid.n", "512") == 1
    out = capsys.readouterr().out
    assert "FAILED" in out


def test_constants_impossible_tolerance(tmp_path):
    assert run(tmp_path, "constants", "--grid.n", "1024", "--tol.id", "1e-15") == 1


def test_expand_circle_is_hypothesis_failure(tmp_path, capsys):
    assert run(tmp_path, "expand", "--curve", "circle:1") == 3
    assert "DegenerateMaximum" in capsys.readouterr().err


def test_expand_table_matches_library(tmp_path, mc):
    assert run(tmp_path, "expand", "--level", "3", "--h", "0.02,0.01,0.005") == 0
    with open(tmp_path / "expansion.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 9
    prof = profile(ParametricBoundary.ellipse(2.0, 1.0))
    for r in rows:
        v = effective.eigenvalue_expansion(int(r["n"]), float(r["h"]), mc, prof)
        assert float(r["value"]) == v
    for n in "123":
        vals = [float(r["value"]) for r in rows if r["n"] == n]
        assert vals == sorted(vals, reverse=True)


def test_disc_solve_labels(tmp_path, capsys):
    assert run(tmp_path, "solve", "--disc", "R=1", "--h", "0.01") == 0
    doc = json.loads((tmp_path / "solve_disc_h0.01.json").read_text())
    assert doc["m"] == [42, 43]
    assert "m=42" in capsys.readouterr().out


def test_strip_solve_with_dump(tmp_path):
    assert run(tmp_path, "solve", "--h", "0.02", "--solve.k", "1", "--solve.dump_matrix", "true") == 0
    doc = json.loads((tmp_path / "solve_h0.02.json").read_text())
    assert doc["meta"]["arithmetic"] == "complex Hermitian"
    assert (tmp_path / "matrix_h0.02.txt").exists()
    assert (tmp_path / "profile.csv").exists()


def test_sweep_manifest(tmp_path):
    assert run(tmp_path, "sweep", "--h", "0.02,0.01,0.006") == 0
    names = {p.rsplit("/", 1)[-1] for p in (tmp_path / "manifest.txt").read_text().split()}
    assert names == {"profile.csv", "sweep.csv", "sweep.json", "sweep_summary.txt"}


def test_trial_command(tmp_path):
    assert run(tmp_path, "trial", "--h", "0.005") == 0
    doc = json.loads((tmp_path / "trial.json").read_text())
    assert doc["rows"][0]["clipped_mass"] < 1e-8


def test_trial_clipped_exit_code(tmp_path, capsys):
    assert run(tmp_path, "trial", "--h", "0.02") == 1
    assert "SupportClipped" in capsys.readouterr().err


def test_unknown_flag_exit_2(tmp_path):
    with pytest.raises(SystemExit) as err:
        run(tmp_path, "constants", "--bogus", "1")
    assert err.value.code == 2


def test_bad_config_value_exit_2(tmp_path):
    assert run(tmp_path, "expand", "--h", "0.01,-1") == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["expand", "--out", str(blocker / "sub")]) == 2


def test_config_round_trip(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["expand", "--h", "0.013,0.007", "--level", "2", "--out", str(a),
                 "--dump-config", str(cfg_path)]) == 0
    assert main(["expand", "--config", str(cfg_path), "--out", str(b)]) == 0
    assert (a / "expansion.csv").read_bytes() == (b / "expansion.csv").read_bytes()
    loaded = RunConfig.load(cfg_path)
    assert loaded.h == (0.013, 0.007) and loaded.level == 2
    assert RunConfig.from_text(loaded.to_text()) == loaded


def test_config_parsing_errors():
    with pytest.raises(ConfigError):
        parse_pairs("no equals sign")
    with pytest.raises(ConfigError):
        RunConfig().updated({"nope": "1"})
    with pytest.raises(ConfigError):
        RunConfig().updated({"strip.richardson": "maybe"})
    assert parse_pairs("a = 1  # comment\n\n# full line\nb=2") == {"a": "1", "b": "2"}
    assert RunConfig().updated({"threads": "auto"}).threads is None


def test_output_dir_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MAGSPEC_OUT", str(tmp_path / "env"))
    assert main(["expand", "--h", "0.01"]) == 0
    assert (tmp_path / "env" / "expansion.csv").exists()


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "magspec", "expand", "--curve", "circle:1", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 3
