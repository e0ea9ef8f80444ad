"""Numerical laboratory for the weighted slab problem div(y^a grad v) = 0 on R^n x (0, 1)
with the nonlinear boundary flux -y^a v_y = f(v) at y = 0 and v_y = 0 at y = 1."""

__version__ = "0.1.0"

from .grid import (DIRICHLET, PERIODIC, ExtensionField, FluxField, SlabGrid, apply_neumann_flux,
                   assemble_operator, build_grid, dual_flux, duality_residual)
from .nonlinearity import Nonlinearity, allen_cahn, polynomial, zero
from .symbol import SymbolTable, apply_spectral, build_symbol_table, symbol_at
from .solver import SolveReport, energy, gradient_bound_check, limit_profiles, minimize, newton_solve

__all__ = [
    "DIRICHLET", "PERIODIC", "ExtensionField", "FluxField", "SlabGrid", "apply_neumann_flux",
    "assemble_operator", "build_grid", "dual_flux", "duality_residual", "Nonlinearity", "allen_cahn",
    "polynomial", "zero", "SymbolTable", "apply_spectral", "build_symbol_table", "symbol_at",
    "SolveReport", "energy", "gradient_bound_check", "limit_profiles", "minimize", "newton_solve",
]
