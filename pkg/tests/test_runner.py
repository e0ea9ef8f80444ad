import hashlib
import json
import os

import numpy as np
import pytest

from slabdtn.cli import bundled_scenarios
from slabdtn.runner import run, run_many
from slabdtn.scenario import load_scenario, parse_scenario
from slabdtn.snapshot import read_snapshot

CONSTANT = """
[scenario]
name = const
pipeline = solve
[grid]
n = 2
L = 4
N = 17
M = 4
"""


def _bundled(name):
    return load_scenario(os.path.join(bundled_scenarios(), name + ".scn"))


def test_constant_solve_gives_tau(tmp_path):
    status, results = run(parse_scenario(CONSTANT), tmp_path)
    assert status == 0 and results[0].passed
    assert np.all(read_snapshot(tmp_path / "solution.slab").values == 1.0)


def test_monotone_pipeline_outputs(tmp_path):
    sc = _bundled("monotone2d").with_overrides(scenario__pipeline=("solve", "energy", "stability", "symmetry"))
    status, _ = run(sc, tmp_path)
    assert status == 0
    for name in ("solve.csv", "energy.csv", "stability.csv", "symmetry.csv", "manifest.json"):
        assert (tmp_path / name).exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["version"] and manifest["scenario_text"] == sc.text
    assert [s["name"] for s in manifest["stages"]] == ["solve", "energy", "stability", "symmetry"]
    assert all("wall_time_s" in s for s in manifest["stages"])
    for fname, digest in manifest["files"].items():
        assert hashlib.sha256((tmp_path / fname).read_bytes()).hexdigest() == digest
    assert set(manifest["files"]) == {f for f in os.listdir(tmp_path) if f != "manifest.json"}


def test_rerun_is_byte_identical(tmp_path):
    sc = parse_scenario(CONSTANT.replace("pipeline = solve", "pipeline = solve, energy, stability")
                        + "[boundary]\nkind = layer\nnoise = 0.05\n")
    sc = sc.with_overrides(scenario__seed=123)
    run(sc, tmp_path / "a")
    run(sc, tmp_path / "b")
    for name in sorted(os.listdir(tmp_path / "a")):
        if name != "manifest.json":
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_seed_changes_noisy_start(tmp_path):
    base = parse_scenario(CONSTANT + "[boundary]\nkind = layer\nnoise = 0.05\n[solve]\ntol = 1e-3\n")
    run(base.with_overrides(scenario__seed=1), tmp_path / "a")
    run(base.with_overrides(scenario__seed=2), tmp_path / "b")
    assert (tmp_path / "a" / "energy_trace.csv").read_bytes() != (tmp_path / "b" / "energy_trace.csv").read_bytes()


def test_stage_failure_leaves_marker(tmp_path):
    sc = parse_scenario("[scenario]\nname = bad\npipeline = energy\n")
    status, results = run(sc, tmp_path)
    assert status != 0 and not results[0].passed
    assert "missing artifact" in (tmp_path / "FAILED").read_text()
    assert (tmp_path / "manifest.json").exists()


def test_marker_cleared_on_success(tmp_path):
    (tmp_path / "FAILED").write_text("old\n")
    status, _ = run(parse_scenario(CONSTANT), tmp_path)
    assert status == 0 and not (tmp_path / "FAILED").exists()


def test_parallel_matches_sequential(tmp_path):
    scs = [_bundled("symbol"), _bundled("duality"), parse_scenario(CONSTANT)]
    seq = run_many(scs, tmp_path / "seq")
    par = run_many(scs, tmp_path / "par", parallel=2)
    assert [(n, s) for n, s, _ in seq] == [(n, s) for n, s, _ in par]
    for sc in scs:
        for name in os.listdir(tmp_path / "seq" / sc.name):
            if name != "manifest.json":
                assert (tmp_path / "seq" / sc.name / name).read_bytes() == \
                    (tmp_path / "par" / sc.name / name).read_bytes()


def test_duplicate_names_rejected(tmp_path):
    with pytest.raises(ValueError):
        run_many([parse_scenario(CONSTANT)] * 2, tmp_path)


@pytest.mark.parametrize("name", ["constant", "layer1d", "monotone2d", "oblique2d", "symbol", "duality"])
def test_bundled_scenarios_pass(tmp_path, name):
    status, results = run(_bundled(name), tmp_path)
    assert status == 0, [(r.name, r.message) for r in results if not r.passed]


def test_sign_error_fails_layer_audits(tmp_path):
    sc = _bundled("layer1d").with_overrides(nonlinearity__flip_sign=True)
    status, results = run(sc, tmp_path)
    verdicts = {r.name: r.passed for r in results}
    assert status != 0
    assert verdicts["hamiltonian"] is False and verdicts["double_well"] is False
