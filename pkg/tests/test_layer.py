import csv

import numpy as np
import pytest

from slabdtn.grid import ExtensionField, build_grid
from slabdtn.layer import (LayerProfile, compute_layer, double_well_audit, hamiltonian_identity,
                           limit_profile_potential_audit, positivity_surrogate, renormalize, transplant,
                           trace_increasing)
from slabdtn.nonlinearity import polynomial


def test_layer_shape(layer_a0):
    assert abs(np.interp(0.0, layer_a0.grid.x, layer_a0.trace)) <= 1e-3
    lo, hi = layer_a0.limits
    assert abs(lo + 1) <= 0.05 and abs(hi - 1) <= 0.05
    assert layer_a0.trace_monotone
    assert np.min(np.diff(layer_a0.trace)) > -1e-12


def test_layer_rejects_potential_without_wells():
    with pytest.raises(ValueError, match="no well"):
        compute_layer(polynomial([0.0, 1.0]), 0.0, 10.0, 41, 4)


def test_constant_plus_one_has_no_hamiltonian_residual(ac):
    g = build_grid(1, 5.0, 21, 4)
    prof = LayerProfile(ExtensionField.constant(g, 1.0), False, (1.0, 1.0), float("nan"))
    rep = hamiltonian_identity(prof, ac)
    assert np.all(rep.w == 0) and np.all(rep.gap == 0) and rep.residual == 0.0


@pytest.mark.parametrize("a", [-0.5, 0.0, 0.5])
def test_hamiltonian_identity_converges(ac, a):
    coarse = hamiltonian_identity(compute_layer(ac, a, 20.0, 161, 16), ac)
    fine = hamiltonian_identity(compute_layer(ac, a, 20.0, 321, 32), ac)
    assert coarse.residual / fine.residual >= 1.5
    assert max(coarse.far_field, fine.far_field) <= 0.05


def test_layer_flux_matches_f(ac, layer_a0):
    assert hamiltonian_identity(layer_a0, ac).flux_error <= 1e-8


def test_hamiltonian_csv(tmp_path, ac, layer_a0):
    path = tmp_path / "layer.csv"
    hamiltonian_identity(layer_a0, ac).write_csv(path, layer_a0.trace)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["x", "u", "flux", "w", "G_gap", "hamiltonian_residual"]
    assert len(rows) == layer_a0.grid.N + 1


def test_double_well_audit(ac, layer_a0):
    rec = double_well_audit(ac, layer_a0)
    assert rec.passed
    assert rec.g_min_gap > 0
    assert rec.phi_min > -1e-6


@pytest.mark.parametrize("a", [-0.5, 0.5])
def test_positivity_surrogate(ac, a):
    prof = compute_layer(ac, a, 20.0, 161, 16)
    phi = positivity_surrogate(prof, ac)
    assert np.max(np.abs(phi[-1, 1:-1])) <= 0.05       # vanishes on the top level up to the identity residual
    assert np.min(phi[:-1, 1:-1]) > -1e-6


def test_double_well_audit_catches_inconsistent_potential(ac, layer_a0):
    from dataclasses import replace
    flipped = replace(ac, f=lambda u: -(u - u ** 3))
    assert not double_well_audit(flipped, layer_a0).consistent


def test_trace_increasing_flags_dip():
    assert trace_increasing(np.array([-1.0, -0.5, 0.0, 0.5, 1.0]))
    assert not trace_increasing(np.array([-1.0, 0.0, -0.1, 0.5, 1.0]))


def test_renormalize():
    assert np.allclose(renormalize([0.0, 0.5, 2.0], 0.0, 2.0), [-1.0, -0.5, 1.0])
    with pytest.raises(ValueError):
        renormalize([1.0], 1.0, 1.0)


def test_limit_profiles_at_wells(ac):
    g = build_grid(2, 4.0, 9, 4)
    rec = limit_profile_potential_audit(ExtensionField.constant(g, 1.0), ExtensionField.constant(g, -1.0), ac)
    assert (rec.m, rec.m_tilde, rec.M_tilde, rec.M) == (-1.0, -1.0, 1.0, 1.0)
    assert rec.wells_ok and rec.ordering_ok and rec.passed
    assert rec.g_prime == (0.0, 0.0, 0.0, 0.0)


def test_limit_profile_one_dimensional(ac, layer_a0):
    g = build_grid(2, 16.0, 65, 16)
    upper = transplant(layer_a0.field, g, [1.0, 0.0])
    rec = limit_profile_potential_audit(upper, ExtensionField.constant(g, -1.0), ac)
    assert rec.upper_kind == "one_dimensional" and rec.upper_cv <= 0.05
    assert rec.lower_kind == "constant"


def test_transplant_needs_same_levels(layer_a0):
    with pytest.raises(ValueError):
        transplant(layer_a0.field, build_grid(2, 4.0, 9, 4), [1.0, 0.0])
