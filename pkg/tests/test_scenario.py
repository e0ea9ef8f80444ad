import pytest

from slabdtn.scenario import ScenarioError, parse_scenario

MINIMAL = "[scenario]\nname = tiny\n\n[grid]\na = 0\nn = 1\n"


def test_minimal_defaults():
    sc = parse_scenario(MINIMAL)
    assert sc.name == "tiny"
    assert sc.pipeline == ("solve",)
    assert sc.seed == 0
    assert sc.get("grid", "N") == 161 and sc.get("grid", "M") == 16
    assert sc.get("nonlinearity", "kind") == "allen_cahn"
    assert sc.get("audit", "radii") == (4.0, 8.0, 16.0)


def test_exponent_out_of_range_names_key():
    with pytest.raises(ScenarioError) as err:
        parse_scenario(MINIMAL.replace("a = 0", "a = 1.5"))
    assert "'a'" in str(err.value) and "(-1, 1)" in str(err.value)


def test_duplicate_key_reports_both_lines():
    text = "[scenario]\nname = x\n[grid]\nN = 5\nM = 3\nN = 7\n"
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert "lines 4 and 6" in str(err.value)


@pytest.mark.parametrize("text, fragment", [
    ("[scenario]\nname = x\n[grid]\nNN = 5\n", "unknown key 'NN'"),
    ("[scenario]\nname = x\n[gird]\nN = 5\n", "unknown section"),
    ("name = x\n", "line 1"),
    ("[scenario]\nname = x\nthis is not a pair\n", "line 3"),
    ("[scenario]\nname = x\npipeline = solve, fly\n", "pipeline"),
    ("[scenario]\nname = x\nseed = -1\n", "seed"),
    ("[scenario]\n", "name"),
    ("[scenario]\nname = x\n[grid]\nN = five\n", "'N' at line 4"),
    ("[scenario]\nname = x\n[nonlinearity]\nkind = polynomial\n", "coefficients"),
    ("[scenario]\nname = x\n[grid]\nn = 2\n[boundary]\ndirection = 1, 0, 0\n", "components"),
    ("[scenario]\nname = x\n[checks]\ncv_max = 0\n", "cv_max"),
    ("[scenario]\nname = x\n[grid]\nL = inf\n", "finite"),
])
def test_errors(text, fragment):
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text)
    assert fragment in str(err.value)


def test_comments_and_overrides():
    sc = parse_scenario(MINIMAL + "# note\nL = 4  # half width\n")
    assert sc.get("grid", "L") == 4.0
    assert sc.with_overrides(scenario__seed=9).seed == 9
    assert sc.seed == 0
