import os

import pytest

from slabdtn.cli import bundled_scenarios, main


def _scn(name):
    return os.path.join(bundled_scenarios(), name + ".scn")


def test_empty_scenario_dir(tmp_path, capsys):
    assert main(["verify", "--scenarios", str(tmp_path), "--out", str(tmp_path / "o")]) == 0
    assert "no scenarios" in capsys.readouterr().out


def test_symbol_subcommand(tmp_path, capsys):
    assert main(["symbol", "--scenario", _scn("symbol"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "symbol" / "symbol.csv").exists()
    assert "[PASS] symbol/symbol" in capsys.readouterr().out


def test_energy_runs_solve_first(tmp_path, capsys):
    assert main(["energy", "--scenario", _scn("constant"), "--out", str(tmp_path), "--seed", "7"]) == 0
    out = capsys.readouterr().out
    assert "constant/solve" in out and "constant/energy" in out
    # a second call reuses the stored solution
    assert main(["stability", "--scenario", _scn("constant"), "--out", str(tmp_path)]) == 0
    assert "constant/solve" not in capsys.readouterr().out


def test_layer_subcommand(tmp_path, capsys):
    assert main(["layer", "--scenario", _scn("layer1d"), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    for stage in ("layer", "hamiltonian", "double_well"):
        assert f"[PASS] layer1d/{stage}" in out


def test_verify_scenario_dir_with_sign_error(tmp_path, capsys):
    d = tmp_path / "scn"
    d.mkdir()
    (d / "layer1d.scn").write_text(open(_scn("layer1d")).read())
    assert main(["verify", "--scenarios", str(d), "--out", str(tmp_path / "o")]) == 0
    assert main(["verify", "--scenarios", str(d), "--out", str(tmp_path / "m"), "--inject-sign-error"]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] layer1d/hamiltonian" in out and "[FAIL] layer1d/double_well" in out


def test_verify_selected_criteria(capsys):
    assert main(["verify", "--only", "1,9"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]  1" in out and "[PASS]  9" in out and "2/2 criteria passed" in out


def test_scenario_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text("[scenario]\nname = b\n[grid]\na = 1.5\n")
    assert main(["solve", "--scenario", str(bad), "--out", str(tmp_path)]) == 2
    assert "'a'" in capsys.readouterr().err


def test_missing_scenario_flag(capsys):
    assert main(["solve"]) == 2


def test_seed_range(tmp_path):
    assert main(["solve", "--scenario", _scn("constant"), "--seed", str(2 ** 64), "--out", str(tmp_path)]) == 2


def test_failed_stage_exit_code(tmp_path):
    bad = tmp_path / "nosolve.scn"
    bad.write_text("[scenario]\nname = nosolve\npipeline = energy\n[grid]\nn = 1\nN = 21\nM = 4\nL = 4\n"
                   "[nonlinearity]\nkind = polynomial\ncoefficients = 0, 0, 0, 0, 0, 0, 0, 0, 1\n")
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path)]) == 1
    assert (tmp_path / "nosolve" / "FAILED").exists()


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for cmd in ("symbol", "solve", "energy", "stability", "layer", "symmetry", "verify"):
        assert cmd in out
