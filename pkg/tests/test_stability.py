import numpy as np
import pytest

from slabdtn.acceptance import _tiny_instances
from slabdtn.grid import PERIODIC, ExtensionField, build_grid
from slabdtn.nonlinearity import zero
from slabdtn.oracles import dense_principal_eigenvalue
from slabdtn.stability import (_rayleigh, lambda_monotonicity, liouville_quotient, monotone_implies_stable_check,
                               principal_eigenpair, stability_form)
from slabdtn.layer import compute_layer


def test_dense_oracle_agreement():
    for form in _tiny_instances():
        assert abs(principal_eigenpair(form).lam - dense_principal_eigenvalue(form)) <= 1e-10


def test_nonincreasing_f_gives_positive_lambda():
    from slabdtn.nonlinearity import polynomial
    nl = polynomial([0.0, -1.0])            # f(u) = -u, f' = -1
    g = build_grid(2, 4.0, 9, 4)
    v = ExtensionField(g, np.random.default_rng(0).uniform(-1, 1, g.shape))
    assert principal_eigenpair(stability_form(v, nl)).lam > 0


def test_zero_nonlinearity_positive_and_monotone():
    g = build_grid(2, 8.0, 17, 4)
    v = ExtensionField.constant(g, 0.0)
    rep = lambda_monotonicity(v, zero(), [2, 4, 8])
    assert np.all(rep.lam > 0) and rep.nonincreasing


def test_normalisation_and_rayleigh(ac, minimizer_2d):
    form = stability_form(minimizer_2d, ac, 4.0)
    pair = principal_eigenpair(form)
    nt = form.n_trace
    assert abs(np.sum(form.B[:nt] * pair.phi[:nt] ** 2) - 1.0) <= 1e-10
    assert abs(pair.rayleigh - pair.lam) <= 1e-10
    assert abs(_rayleigh(form, pair.phi[:nt]) - pair.lam) <= 1e-10
    assert pair.positive and pair.phi_min > 0


def test_minimizer_stable_and_lambda_nonincreasing(ac, minimizer_2d):
    rep = lambda_monotonicity(minimizer_2d, ac, [2, 4, 8])
    assert np.all(rep.lam >= -1e-8)
    assert rep.nonincreasing
    assert np.all(rep.phi_min > 0)


def test_periodic_full_box_rejected(ac):
    g = build_grid(1, 4.0, 8, 4, None, 0.0, PERIODIC)
    with pytest.raises(ValueError):
        stability_form(ExtensionField.constant(g, 1.0), ac)


def test_layer_is_stable(ac):
    prof = compute_layer(ac, 0.0, 20.0, 321, 16)
    pair = principal_eigenpair(stability_form(prof.field, ac, 16.0))
    assert pair.lam >= -1e-8


def test_node_centred_layer_pinning_is_exponentially_small(ac):
    # on a lattice the node-centred kink is a saddle of the pinning potential;
    # its negative eigenvalue shrinks exponentially with h
    lams = [principal_eigenpair(stability_form(compute_layer(ac, 0.0, 20.0, N, 16).field, ac)).lam
            for N in (161, 321)]
    assert lams[0] < 0 and abs(lams[1]) <= 1e-3 * abs(lams[0])


def test_monotone_layer_derivative(ac):
    res = []
    for N, M in [(81, 8), (161, 16)]:
        prof = compute_layer(ac, 0.0, 20.0, N, M)
        rec = monotone_implies_stable_check(prof.field, ac, 0)
        assert rec.status == "ok" and rec.phi_min > 0
        res.append(rec.linearized_residual)
    assert res[0] / res[1] >= 1.5


def test_monotone_check_constant_is_degenerate(ac):
    g = build_grid(1, 4.0, 9, 4)
    assert monotone_implies_stable_check(ExtensionField.constant(g, 1.0), ac, 0).status == "degenerate"


def test_quotient_of_exactly_1d_field():
    g = build_grid(2, 4.0, 17, 4)
    v = ExtensionField.from_trace_profile(g, lambda x1, x2: np.tanh(x1) + 0 * x2)
    from slabdtn.solver import lateral_gradient
    phi = lateral_gradient(v.values, g)[0]
    q = liouville_quotient(v, phi, 0)
    assert np.allclose(q.sigma, 1.0) and q.coefficient_of_variation == 0.0


def test_quotient_of_constant_is_degenerate():
    g = build_grid(2, 4.0, 9, 4)
    v = ExtensionField.constant(g, 0.5)
    q = liouville_quotient(v, np.zeros(g.shape), 1)
    assert q.status == "degenerate" and np.all(q.sigma == 0.0)


def test_quotient_of_oblique_solve(oblique_2d):
    from slabdtn.solver import lateral_gradient
    phi = lateral_gradient(oblique_2d.values, oblique_2d.grid)[1]
    q = liouville_quotient(oblique_2d, phi, 0)
    assert q.coefficient_of_variation <= 0.05
    assert q.mean == pytest.approx(1 / np.tan(np.pi / 6), rel=0.05)


def test_quotient_rejects_sign_changing_phi():
    g = build_grid(2, 4.0, 9, 4)
    v = ExtensionField.from_trace_profile(g, lambda x1, x2: x1 + x2)
    phi = np.broadcast_to(np.sin(g.coords()[0]), g.shape)
    with pytest.raises(ValueError):
        liouville_quotient(v, phi, 0)
