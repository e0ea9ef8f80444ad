"""Localised energies over nested sub-boxes and cut-off competitors."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .grid import ExtensionField
from .nonlinearity import Nonlinearity
from .solver import energy


@dataclass
class EnergyReport:
    radii: np.ndarray
    dirichlet: np.ndarray
    potential: np.ndarray
    total: np.ndarray
    fitted_exponent: float = float("nan")
    exponent_stderr: float = float("nan")
    degenerate: bool = True
    note: str = ""

    @property
    def exponent_ci(self):
        return (self.fitted_exponent - 2 * self.exponent_stderr,
                self.fitted_exponent + 2 * self.exponent_stderr)

    def nondecreasing(self, rtol=1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.total))))
        return bool(np.all(np.diff(self.total) >= -rtol * scale))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["R", "dirichlet", "potential", "total"])
            for row in zip(self.radii, self.dirichlet, self.potential, self.total):
                wr.writerow([repr(float(x)) for x in row])
            wr.writerow(["exponent", repr(float(self.fitted_exponent)), "", ""])
            wr.writerow(["exponent_stderr", repr(float(self.exponent_stderr)), "", ""])


def fit_exponent(radii, values):
    """Least-squares slope of log(values) on log(radii) and its standard error.

    Returns (nan, nan, reason) when fewer than 3 radii or a nonpositive value.
    """
    r = np.asarray(radii, float)
    e = np.asarray(values, float)
    if r.size < 3:
        return float("nan"), float("nan"), "fewer than 3 radii"
    if np.any(e <= 1e-14 * max(1.0, float(np.max(np.abs(e))))):
        return float("nan"), float("nan"), "zero energy at some radius"
    x, yv = np.log(r), np.log(e)
    X = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(X, yv, rcond=None)
    resid = yv - X @ coef
    dof = r.size - 2
    stderr = float(np.sqrt(resid @ resid / dof / np.sum((x - x.mean()) ** 2)))
    return float(coef[0]), stderr, ""


def nested_energies(v: ExtensionField, nl: Nonlinearity, radii) -> EnergyReport:
    radii = np.asarray(sorted(float(R) for R in radii))
    parts = np.array([energy(v, nl, R) for R in radii]).reshape(-1, 2)
    total = parts.sum(axis=1)
    slope, stderr, note = fit_exponent(radii, total)
    return EnergyReport(radii, parts[:, 0], parts[:, 1], total, slope, stderr,
                        bool(np.isnan(slope)), note)


def smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 + t * (-15.0 + 6.0 * t))


def cutoff(grid, R):
    """eta_R on the lateral nodes: 1 for sup-norm radius <= R-1, 0 for >= R, quintic ramp between."""
    r = np.max(np.abs(np.stack(grid.coords())), axis=0)
    return smoothstep5(R - r)


def build_competitor(v: ExtensionField, nl: Nonlinearity, R) -> ExtensionField:
    grid = v.grid
    R = float(R)
    if R < 2:
        raise ValueError("competitor radius must be >= 2")
    if R + 1 > grid.L + 1e-12:
        raise ValueError(f"need R + 1 <= L (R={R}, L={grid.L})")
    grid.check_radius(R)
    eta = cutoff(grid, R)
    return ExtensionField(grid, eta * nl.tau + (1.0 - eta) * v.values)


@dataclass
class MinimalityRecord:
    R: float
    energy_v: float
    energy_w: float
    holds: bool
    shell_energy: float
    ordering_checked: bool = False
    ordering_holds: bool = True
    note: str = ""

    @property
    def margin(self) -> float:
        return self.energy_w - self.energy_v


def _extend(profile: ExtensionField, grid, axis):
    return np.expand_dims(profile.values, axis=axis + 1)


def minimality_audit(v: ExtensionField, nl: Nonlinearity, R, vbar: ExtensionField = None,
                     vunder: ExtensionField = None, rtol=1e-8, axis=-1) -> MinimalityRecord:
    """Compare E_R(v) with E_R of the cut-off competitor; optionally check vunder <= w <= vbar.

    The ordering test applies when tau lies between sup of the lower profile
    trace and inf of the upper profile trace; the profiles are extended
    constantly along ``axis``.
    """
    w = build_competitor(v, nl, R)
    Ev = sum(energy(v, nl, R))
    Ew = sum(energy(w, nl, R))
    tol = rtol * max(1.0, abs(Ev))
    shell = Ew - sum(energy(w, nl, R - 1))
    rec = MinimalityRecord(float(R), Ev, Ew, bool(Ev <= Ew + tol), shell)
    if vbar is not None and vunder is not None:
        grid = v.grid
        ax = axis % grid.n
        lo_tr, hi_tr = float(np.max(vunder.trace)), float(np.min(vbar.trace))
        if lo_tr <= nl.tau <= hi_tr:
            inside = grid.interior_mask(R) | (grid.lateral_measure(R) > 0)
            lo = _extend(vunder, grid, ax)
            hi = _extend(vbar, grid, ax)
            ok = (w.values >= lo - 1e-8) & (w.values <= hi + 1e-8)
            rec.ordering_checked = True
            rec.ordering_holds = bool(np.all(ok[:, inside]))
        else:
            rec.note = "tau outside [sup lower trace, inf upper trace]; ordering not applicable"
    return rec


def shell_scaling(v: ExtensionField, nl: Nonlinearity, radii):
    """shell energy / R^(n-1) for each radius, and the max/min ratio across them."""
    n = v.grid.n
    ratios = []
    for R in radii:
        w = build_competitor(v, nl, R)
        shell = sum(energy(w, nl, R)) - sum(energy(w, nl, R - 1))
        ratios.append(shell / float(R) ** (n - 1))
    ratios = np.asarray(ratios)
    spread = float(ratios.max() / ratios.min()) if np.all(ratios > 0) else float("inf")
    return ratios, spread
