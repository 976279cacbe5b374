import json
import subprocess
import sys

import pytest

from cdqaoa import SpinInstance
from cdqaoa.cli import build_parser, main

SMALL = ["--n-spins", "4", "--count", "4", "--p-max", "2", "--variants", "QAOA,2CD", "--restarts", "2",
         "--workers", "1", "--zones", "2"]


def run(tmp_path, *args):
    return main([*args, "--output-dir", str(tmp_path)])


def only_dir(path):
    (child,) = path.iterdir()
    return child


def test_gen_is_deterministic(tmp_path):
    assert run(tmp_path / "a", "gen", "--n-spins", "5", "--count", "3", "--seed", "7") == 0
    assert run(tmp_path / "b", "gen", "--n-spins", "5", "--count", "3", "--seed", "7") == 0
    a = only_dir(tmp_path / "a" / "gen") / "instances"
    b = only_dir(tmp_path / "b" / "gen") / "instances"
    assert sorted(p.name for p in a.iterdir()) == ["N5-s7.json", "N5-s8.json", "N5-s9.json"]
    for p in a.iterdir():
        assert p.read_bytes() == (b / p.name).read_bytes()
    assert SpinInstance.load(a / "N5-s8.json").seed == 8
    assert only_dir(tmp_path / "a" / "gen").name == only_dir(tmp_path / "b" / "gen").name


def test_spectrum_from_files(tmp_path):
    run(tmp_path, "gen", "--n-spins", "3", "--count", "2")
    files = sorted((only_dir(tmp_path / "gen") / "instances").iterdir())
    assert run(tmp_path, "spectrum", "--instance", *map(str, files)) == 0
    out = only_dir(tmp_path / "spectrum")
    spec = json.loads((out / "spectra" / "N3-s0.json").read_text())
    assert spec["gap"] > 0 and sum(l["multiplicity"] for l in spec["levels"]) == 8


def test_run_resume_and_analyses(tmp_path, capsys):
    assert run(tmp_path, "run", *SMALL) == 0
    first = json.loads(capsys.readouterr().out.splitlines()[0])
    assert first["new"] == first["records"] == 16 and first["failed"] == 0
    assert run(tmp_path, "run", *SMALL) == 0
    second = json.loads(capsys.readouterr().out.splitlines()[0])
    assert second["new"] == 0
    run_dir = only_dir(tmp_path / "run")
    assert {p.name for p in run_dir.iterdir()} == {"records.csv", "config.json", "metadata.json"}

    assert run(tmp_path, "stats", *SMALL) == 0
    summary = json.loads((only_dir(tmp_path / "stats") / "summary.json").read_text())
    assert set(summary["overall"]) == {"QAOA", "QAOA_2CD"}
    assert run(tmp_path, "zones", *SMALL) == 0
    assert (only_dir(tmp_path / "zones") / "zones.csv").read_text().count("\n") == 3
    assert run(tmp_path, "steps", *SMALL, "--tolerance", "1") == 0
    steps = json.loads((only_dir(tmp_path / "steps") / "summary.json").read_text())
    assert steps["steps"]["QAOA"] == {"1": "1", "2": "1"}
    assert run(tmp_path, "hist", *SMALL, "--bin-width", "0.5") == 0
    hist = json.loads((only_dir(tmp_path / "hist") / "summary.json").read_text())
    assert sum(hist["counts"]) == 4


def test_outputs_are_reproducible_apart_from_metadata(tmp_path):
    for name in ("a", "b"):
        assert run(tmp_path / name, "run", *SMALL[:-4], "--workers", "1") == 0
    a, b = only_dir(tmp_path / "a" / "run"), only_dir(tmp_path / "b" / "run")
    assert a.name == b.name
    for f in ("records.csv", "config.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_spins": 3, "count": 2, "seed": 5}))
    assert run(tmp_path, "gen", "--config", str(cfg), "--seed", "9") == 0
    names = sorted(p.name for p in (only_dir(tmp_path / "gen") / "instances").iterdir())
    assert names == ["N3-s10.json", "N3-s9.json"]


def test_landscape_outputs(tmp_path):
    assert run(tmp_path, "landscape", "--n-spins", "2", "--seed", "1", "--grid-size", "9",
               "--gamma-range", "-1.5", "1.5", "--restarts", "2") == 0
    out = only_dir(tmp_path / "landscape")
    assert (out / "grid.csv").read_text().count("\n") == 82
    assert (out / "trajectory.csv").read_text().startswith("iteration,beta_1,gamma_1,cost")
    summary = json.loads((out / "summary.json").read_text())
    assert summary["grid_min"]["cost"] >= summary["optimum"]["cost"] - 1e-12


def test_error_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bogus"])
    assert exc.value.code == 2
    assert json.loads(capsys.readouterr().err.splitlines()[-1])["error"] == "usage"
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(tmp_path, "gen", "--config", str(bad)) == 3
    bad.write_text(json.dumps({"n_spin": 3}))
    assert run(tmp_path, "gen", "--config", str(bad)) == 3
    assert run(tmp_path, "gen", "--config", str(tmp_path / "missing.json")) == 3
    inst = tmp_path / "inst.json"
    inst.write_text(json.dumps({"n_spins": 3, "couplings": [0.1]}))
    assert run(tmp_path, "spectrum", "--instance", str(inst)) == 3
    assert run(tmp_path, "stats", "--count", "3") == 3
    assert run(tmp_path, "gen", "--n-spins", "1") == 3
    capsys.readouterr()
    # an all-zero instance has no gap: a runtime failure
    inst.write_text(json.dumps({"n_spins": 2, "couplings": [0.0]}))
    assert run(tmp_path, "spectrum", "--instance", str(inst)) == 4
    line = json.loads(capsys.readouterr().err.splitlines()[-1])
    assert line == {"error": "DegenerateSpectrumError", "exit_code": 4, "message": line["message"]}


def test_every_flag_is_documented():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "subcommand")
    assert set(sub.choices) == {"gen", "spectrum", "run", "stats", "zones", "steps", "hist", "landscape"}
    for name, p in sub.choices.items():
        for action in p._actions:
            assert action.help, f"{name} {action.option_strings} lacks help"


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "cdqaoa.cli", "hist", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "--bin-width" in out.stdout
