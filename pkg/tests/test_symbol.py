import numpy as np
import pytest

from slabdtn.grid import ExtensionField, PERIODIC, apply_neumann_flux, build_grid, dual_flux
from slabdtn.fastsolve import SeparableSolver
from slabdtn.oracles import bessel_symbol, half_space_constant
from slabdtn.symbol import apply_spectral, build_symbol_table, stabilized_slope, symbol_at


@pytest.mark.parametrize("a", [-0.5, 0.0, 0.7])
def test_zero_frequency(a):
    assert symbol_at(a, 0.0, 50) == 0.0


def test_tanh_anchor():
    assert symbol_at(0.0, 1.0, 2000, 1.0) == pytest.approx(np.tanh(1.0), rel=1e-5)


def test_high_frequency_half_laplacian():
    # the lumped discrete symbol sits above rho tanh rho by (rho h)^2 / 8 on a uniform mesh
    ratio = symbol_at(0.0, 50.0, 2000) / 50.0
    assert ratio >= 0.98
    assert ratio - 1.0 <= (50.0 / 2000) ** 2 / 8 * (1 + 1e-3)


@pytest.mark.parametrize("a", [-0.5, 0.3, 0.6])
@pytest.mark.parametrize("rho", [0.5, 2.0, 8.0])
def test_matches_bessel_closed_form(a, rho):
    exact = float(bessel_symbol(a, rho)[0])
    assert symbol_at(a, rho, 4000) == pytest.approx(exact, rel=2e-4)


def test_bessel_oracle_reduces_to_tanh():
    rho = np.array([0.3, 1.0, 7.0])
    assert np.allclose(bessel_symbol(0.0, rho), rho * np.tanh(rho), rtol=1e-12)


@pytest.mark.parametrize("a", [-0.5, 0.0, 0.5])
def test_small_frequency_limit(a):
    rho = 1e-3
    assert symbol_at(a, rho, 400) / rho ** 2 == pytest.approx(1.0 / (1.0 + a), rel=1e-4)


@pytest.mark.parametrize("a", [-0.5, 0.5])
def test_large_frequency_constant(a):
    tab = build_symbol_table(a, 0.0, 100.0, 32, 4000)
    assert tab.asymptotic_constant == pytest.approx(half_space_constant(a), rel=0.05)


def test_table_slope_a0():
    tab = build_symbol_table(0.0, 10.0, 100.0, 32)
    assert abs(tab.free_slope - 1.0) <= 0.02


def test_stabilized_slope_a05():
    slope, hist = stabilized_slope(0.5)
    assert abs(slope - 0.5) <= 0.05
    assert len(hist) >= 2


@pytest.mark.parametrize("a", [-0.5, 0.0, 0.5])
def test_table_strictly_increasing(a):
    tab = build_symbol_table(a, 0.0, 50.0, 40)
    assert np.all(np.diff(tab.sigma) > 0)
    assert tab.sigma[0] == 0.0


def test_under_resolved_table_rejected():
    with pytest.raises(ValueError, match="under-resolves"):
        build_symbol_table(0.0, 0.0, 100.0, 16, M=10)


def test_spectral_constant_gives_zero():
    g = build_grid(1, 4.0, 32, 4, None, 0.0, PERIODIC)
    assert np.max(np.abs(apply_spectral(np.full(32, 3.0), g))) <= 1e-12


@pytest.mark.parametrize("a", [-0.5, 0.5])
def test_spectral_eigenfunction(a):
    g = build_grid(1, 4.0, 32, 4, None, a, PERIODIC)
    xi = 3 * np.pi / 4.0
    u = np.cos(xi * g.x)
    out = apply_spectral(u, g, M=300)
    expected = symbol_at(a, xi, 300, g.gamma_mesh) * u
    assert np.allclose(out, expected, atol=1e-12)


def test_spectral_matches_physical_solve():
    L, N, M = 4.0, 64, 64
    g = build_grid(2, L, N, M, None, 0.0, PERIODIC)
    X1, X2 = g.coords()
    datum = np.cos(np.pi * X1 / L) + 0.5 * np.sin(np.pi * X2 / L)
    v = ExtensionField(g, SeparableSolver(g).solve(apply_neumann_flux(g, datum)))
    back = dual_flux(v).bottom
    spectral = apply_spectral(v.trace, g, M=M)
    assert np.max(np.abs(spectral - back)) <= 1e-3 * np.max(np.abs(back))


def test_table_interpolation_agrees_with_direct():
    tab = build_symbol_table(0.3, 0.0, 20.0, 256)
    assert tab(np.array(5.0)) == pytest.approx(symbol_at(0.3, 5.0, tab.M, tab.gamma_mesh), rel=1e-4)
    with pytest.raises(ValueError):
        tab(np.array(50.0))
