import csv

import numpy as np
import pytest

from slabdtn.energy import build_competitor, fit_exponent, minimality_audit, nested_energies, shell_scaling
from slabdtn.grid import ExtensionField, build_grid
from slabdtn.solver import energy


def test_constant_field_totals_zero(ac):
    g = build_grid(2, 16.0, 33, 4)
    rep = nested_energies(ExtensionField.constant(g, 1.0), ac, [4, 8, 16])
    assert np.all(rep.total == 0.0)
    assert rep.degenerate and np.isnan(rep.fitted_exponent)


def test_layer_energy_saturates(ac, layer_a0):
    rep = nested_energies(layer_a0.field, ac, [4, 8, 16])
    assert rep.fitted_exponent <= 0.3
    assert rep.nondecreasing()


def test_fit_exponent_exact_power():
    r = np.array([2.0, 4.0, 8.0, 16.0])
    slope, stderr, note = fit_exponent(r, 3.0 * r ** 1.7)
    assert slope == pytest.approx(1.7, abs=1e-12) and stderr <= 1e-10 and note == ""


def test_fit_exponent_needs_three_radii():
    assert np.isnan(fit_exponent([1.0, 2.0], [1.0, 2.0])[0])


def test_energy_csv(tmp_path, ac, minimizer_2d):
    rep = nested_energies(minimizer_2d, ac, [2, 4, 8])
    path = tmp_path / "energy.csv"
    rep.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["R", "dirichlet", "potential", "total"]
    assert rows[-2][0] == "exponent" and rows[-1][0] == "exponent_stderr"


def test_competitor_of_constant_is_constant(ac):
    g = build_grid(2, 8.0, 17, 4)
    v = ExtensionField.constant(g, ac.tau)
    assert np.all(build_competitor(v, ac, 4).values == ac.tau)


def test_competitor_equals_v_outside(ac, minimizer_2d):
    v = minimizer_2d
    R = 6.0
    w = build_competitor(v, ac, R)
    r = np.max(np.abs(np.stack(v.grid.coords())), axis=0)
    outside = r >= R - 1e-12
    assert np.max(np.abs(w.values[:, outside] - v.values[:, outside])) == 0.0


def test_competitor_inner_box_is_flat(ac, minimizer_2d):
    w = build_competitor(minimizer_2d, ac, 6.0)
    d, p = energy(w, ac, 5.0)
    assert abs(d) <= 1e-12 and abs(p) <= 1e-12


def test_competitor_radius_limits(ac, minimizer_2d):
    with pytest.raises(ValueError):
        build_competitor(minimizer_2d, ac, 1.5)
    with pytest.raises(ValueError):
        build_competitor(minimizer_2d, ac, 16.0)


def test_tau_beats_interior_perturbation(ac):
    g = build_grid(2, 6.0, 13, 4)
    v = ExtensionField.constant(g, ac.tau)
    bump = v.values + 0.1 * np.where(g.free_mask(), 1.0, 0.0)
    assert sum(energy(ExtensionField(g, bump), ac)) > sum(energy(v, ac))


def test_minimizer_beats_competitor(ac, minimizer_2d):
    rec = minimality_audit(minimizer_2d, ac, 8)
    assert rec.holds and rec.margin >= 0


def test_minimality_ordering_check(ac):
    from slabdtn.solver import limit_profiles
    g = build_grid(2, 8.0, 17, 4)
    v = ExtensionField.constant(g, 1.0)
    vbar, vunder, _ = limit_profiles(v, ac)
    rec = minimality_audit(v, ac, 4, vbar, vunder)
    assert rec.ordering_checked and rec.ordering_holds


def test_minimality_ordering_not_applicable(ac, oblique_2d):
    from slabdtn.solver import limit_profiles
    vbar, vunder, _ = limit_profiles(oblique_2d, ac)
    rec = minimality_audit(oblique_2d, ac, 8, vbar, vunder)
    assert not rec.ordering_checked and "not applicable" in rec.note


def test_shell_energy_scaling(ac):
    from slabdtn.acceptance import layer_minimizer_2d
    _, rep = layer_minimizer_2d(L=32.0, N=129, M=8)
    ratios, spread = shell_scaling(rep.field, ac, [4, 8, 16])
    assert spread <= 2.0
