"""Fourier symbol of the slab Dirichlet-to-Neumann operator.

For a lateral frequency of magnitude rho the extension of exp(i xi.x) is
exp(i xi.x) theta(y) with (y^a theta')' = rho^2 y^a theta, theta(0) = 1 and
theta'(1) = 0; the symbol is the boundary flux -lim y^a theta'(y).  The column
problem is the n = 0 restriction of the slab operator, so symbols computed
here are exactly the ones the lateral discretisation sees.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grid import (SlabGrid, check_exponent, default_gamma, face_conductances,
                   graded_levels, level_weights, band_weights)
from .tridiag import solve_tridiagonal


def column_symbols(y, a, rho_sq):
    """Discrete symbol for an array of squared frequencies on the vertical levels ``y``.

    Returns the row-0 Schur complement kappa_{1/2} (theta_0 - theta_1) + rho^2 omega_0,
    i.e. the flux the bottom row balances in the full slab operator.
    """
    rho_sq = np.asarray(rho_sq, dtype=float)
    kap = face_conductances(y, a)
    om = level_weights(band_weights(y, a))
    M = kap.size
    shape = (M,) + (1,) * rho_sq.ndim
    k_lo = kap.reshape(shape)                       # face below level j (j = 1..M)
    k_hi = np.concatenate([kap[1:], [0.0]]).reshape(shape)
    diag = rho_sq[None] * om[1:].reshape(shape) + k_lo + k_hi
    off = -kap[1:].reshape((M - 1,) + (1,) * rho_sq.ndim)
    # unknown is theta - 1, which avoids cancelling 1 - theta_1 against a huge kappa_{1/2}
    rhs = -rho_sq[None] * om[1:].reshape(shape)
    dev = solve_tridiagonal(off, diag, off, rhs)
    return -kap[0] * dev[0] + rho_sq * om[0]


def symbol_at(a: float, rho: float, M: int, gamma_mesh=None) -> float:
    a = check_exponent(a)
    if rho < 0:
        raise ValueError("frequency magnitude rho must be nonnegative")
    if M < 2:
        raise ValueError("need M >= 2 vertical cells")
    if gamma_mesh is None:
        gamma_mesh = default_gamma(a)
    return float(column_symbols(graded_levels(M, gamma_mesh), a, np.array(rho) ** 2))


def required_levels(rho_max: float, gamma_mesh: float) -> int:
    """Smallest M that keeps the 1/rho boundary layer resolved at rho_max."""
    return int(np.ceil(20.0 * max(rho_max, 1.0) ** (1.0 / gamma_mesh)))


@dataclass(frozen=True, eq=False)
class SymbolTable:
    a: float
    rho: np.ndarray
    sigma: np.ndarray
    asymptotic_constant: float
    fit_residual: float
    free_slope: float
    free_slope_stderr: float
    M: int
    gamma_mesh: float

    @property
    def s(self) -> float:
        return (1.0 - self.a) / 2.0

    def local_slope(self) -> np.ndarray:
        slope = np.full(self.rho.size, np.nan)
        pos = self.rho > 0
        if pos.sum() >= 2:
            slope[pos] = np.gradient(np.log(self.sigma[pos]), np.log(self.rho[pos]))
        return slope

    def __call__(self, rho):
        """Log-log interpolation inside the sampled range, 0 at rho = 0."""
        rho = np.asarray(rho, dtype=float)
        pos = self.rho > 0
        lo, hi = self.rho[pos][0], self.rho[pos][-1]
        if np.any((rho > 0) & ((rho < lo * (1 - 1e-12)) | (rho > hi * (1 + 1e-12)))):
            raise ValueError("frequency outside the tabulated range")
        out = np.zeros_like(rho)
        nz = rho > 0
        out[nz] = np.exp(np.interp(np.log(rho[nz]), np.log(self.rho[pos]), np.log(self.sigma[pos])))
        return out

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["rho", "sigma", "local_slope"])
            for r, s, k in zip(self.rho, self.sigma, self.local_slope()):
                wr.writerow([repr(float(r)), repr(float(s)), "" if np.isnan(k) else repr(float(k))])


def fit_power_law(rho, sigma):
    """Least-squares slope of log sigma against log rho, with its standard error."""
    x, y = np.log(rho), np.log(sigma)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    dof = x.size - 2
    if dof > 0:
        resid = y - A @ coef
        s2 = resid @ resid / dof
        stderr = float(np.sqrt(s2 / np.sum((x - x.mean()) ** 2)))
    else:
        stderr = float("nan")
    return float(coef[0]), stderr


def build_symbol_table(a, rho_min, rho_max, count=64, M=None, gamma_mesh=None) -> SymbolTable:
    a = check_exponent(a)
    if not (0 <= rho_min < rho_max):
        raise ValueError("need 0 <= rho_min < rho_max")
    if count < 8:
        raise ValueError("need at least 8 samples")
    if gamma_mesh is None:
        gamma_mesh = default_gamma(a)
    need = required_levels(rho_max, gamma_mesh)
    if M is None:
        M = need
    elif M < need:
        raise ValueError(f"M={M} under-resolves rho_max={rho_max}; need M >= {need}")
    lo = rho_min if rho_min > 0 else rho_max * 1e-3
    rho = np.geomspace(lo, rho_max, count)
    if rho_min == 0:
        rho = np.concatenate([[0.0], rho])
    sigma = column_symbols(graded_levels(M, gamma_mesh), a, rho ** 2)

    window = (rho >= rho_max / 10.0 * (1 - 1e-12)) & (rho > 0)
    slope, stderr = fit_power_law(rho[window], sigma[window])
    target = 1.0 - a
    logc = np.mean(np.log(sigma[window]) - target * np.log(rho[window]))
    c = float(np.exp(logc))
    fit_res = float(np.max(np.abs(sigma[window] * rho[window] ** (-target) / c - 1.0)))
    return SymbolTable(a, rho, sigma, c, fit_res, slope, stderr, int(M), float(gamma_mesh))


def stabilized_slope(a, rho_min=10.0, rho_max=100.0, count=32, gamma_mesh=None,
                     tol=5e-3, max_doublings=6):
    """Free log-log slope over [rho_min, rho_max], doubling M until it moves by less than tol."""
    if gamma_mesh is None:
        gamma_mesh = default_gamma(a)
    M = required_levels(rho_max, gamma_mesh)
    history = []
    prev = None
    for _ in range(max_doublings + 1):
        rho = np.geomspace(rho_min, rho_max, count)
        sigma = column_symbols(graded_levels(M, gamma_mesh), a, rho ** 2)
        slope, _ = fit_power_law(rho, sigma)
        history.append((M, slope))
        if prev is not None and abs(slope - prev) < tol:
            break
        prev = slope
        M *= 2
    return history[-1][1], history


def apply_spectral(u, grid: SlabGrid, table: SymbolTable = None, M=None, gamma_mesh=None):
    """Apply the DtN operator to a periodic lateral field by Fourier multiplication.

    Symbols come from ``table`` (interpolated) or, by default, are solved on
    demand for every distinct |xi| on ``M`` vertical cells.
    """
    if not grid.periodic:
        raise ValueError("spectral application needs a periodic lateral grid")
    u = np.asarray(u, dtype=float)
    if u.shape != grid.lateral_shape:
        raise ValueError("field does not match the lateral grid")
    N, h = grid.N, grid.h
    k = 2 * np.pi * sfft.fftfreq(N, d=h)
    xi = np.sqrt(sum(kk ** 2 for kk in np.meshgrid(*([k] * grid.n), indexing="ij")))
    if table is not None:
        sig = table(xi)
    else:
        if gamma_mesh is None:
            gamma_mesh = grid.gamma_mesh
        if M is None:
            M = required_levels(float(xi.max()), gamma_mesh)
        uniq, inv = np.unique(np.round(xi, 12), return_inverse=True)
        sig = column_symbols(graded_levels(M, gamma_mesh), grid.a, uniq ** 2)[inv].reshape(xi.shape)
    out = sfft.ifftn(sfft.fftn(u) * sig)
    scale = max(1.0, float(np.max(np.abs(out.real))))
    if np.max(np.abs(out.imag)) > 1e-10 * scale:
        raise ArithmeticError("spectral result is not real")
    return out.real
