"""Numerical test of one-dimensional symmetry v(x, y) = v0(omega . x, y)."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .grid import ExtensionField
from .solver import lateral_gradient

CONSTANT_TOL = 1e-8
ONE_DIM = "one_dimensional"
CONSTANT = "constant"
NOT_ONE_DIM = "not_one_dimensional"


def collar_mask(grid, collar=0.1):
    """Lateral nodes within (1 - collar) L of the centre in every axis, Dirichlet faces excluded."""
    keep = np.abs(grid.x) <= (1.0 - collar) * grid.L + 1e-12
    if not grid.periodic:
        keep &= (np.arange(grid.N) > 0) & (np.arange(grid.N) < grid.N - 1)
    out = keep
    for _ in range(grid.n - 1):
        out = np.logical_and.outer(out, keep)
    return out


@dataclass
class DirectionEstimate:
    omega: np.ndarray
    constant: bool
    direction_cv: float
    sup_gradient: float


def infer_direction(v: ExtensionField, collar=0.1, weak=1e-3) -> DirectionEstimate:
    """omega = normalised mean trace gradient over the collar interior.

    direction_cv = rms deviation of the unit gradients from their mean, over
    their mean length, using nodes whose gradient exceeds ``weak`` times the max.
    """
    grid = v.grid
    if grid.n < 2:
        raise ValueError("direction inference needs n >= 2")
    g = lateral_gradient(v.trace[None], grid)[:, 0]
    mask = collar_mask(grid, collar)
    gm = g[:, mask]
    mag = np.sqrt(np.sum(gm ** 2, axis=0))
    sup = float(mag.max()) if mag.size else 0.0
    if sup <= CONSTANT_TOL:
        return DirectionEstimate(np.zeros(grid.n), True, 0.0, sup)
    mean = gm.mean(axis=1)
    omega = mean / np.linalg.norm(mean)
    strong = mag >= weak * sup
    unit = gm[:, strong] / mag[strong]
    um = unit.mean(axis=1)
    spread = np.sqrt(np.mean(np.sum((unit - um[:, None]) ** 2, axis=0)))
    return DirectionEstimate(omega, False, float(spread / np.linalg.norm(um)), sup)


@dataclass
class ProfileFit:
    omega: np.ndarray
    centers: np.ndarray      # bin abscissae (mean omega . x of each bin)
    v0: np.ndarray           # (M + 1, bins)
    residual: float

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["omega_dot_x", "level", "v0"])
            for j in range(self.v0.shape[0]):
                for c, val in zip(self.centers, self.v0[j]):
                    wr.writerow([repr(float(c)), j, repr(float(val))])


def profile_fit(v: ExtensionField, omega, bins=None, collar=0.1) -> ProfileFit:
    """Bin the collar interior by omega . x; v0 = bin means per level, read off by linear interpolation.

    Empty bins are dropped, which merges them into their neighbours' interpolation interval.
    """
    grid = v.grid
    omega = np.asarray(omega, dtype=float)
    omega = omega / np.linalg.norm(omega)
    mask = collar_mask(grid, collar)
    s = sum(w * X for w, X in zip(omega, grid.coords()))[mask]
    if bins is None:
        bins = max(8, int(np.ceil(np.ptp(s) / (0.25 * grid.h))))
    edges = np.linspace(s.min(), s.max(), bins + 1)
    which = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, bins - 1)
    counts = np.bincount(which, minlength=bins)
    used = counts > 0
    centers = (np.bincount(which, weights=s, minlength=bins)[used] / counts[used])
    vals = v.values[:, mask]
    v0 = np.stack([np.bincount(which, weights=row, minlength=bins)[used] / counts[used] for row in vals])
    fitted = np.stack([np.interp(s, centers, row) for row in v0])
    residual = float(np.max(np.abs(vals - fitted)))
    return ProfileFit(omega, centers, v0, residual)


@dataclass
class SymmetryVerdict:
    omega: np.ndarray
    direction_cv: float
    profile_residual: float
    verdict: str
    cv_threshold: float
    residual_threshold: float
    fit: ProfileFit = None

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["key", "value"])
            wr.writerow(["verdict", self.verdict])
            for k, w in enumerate(self.omega):
                wr.writerow([f"omega_{k + 1}", repr(float(w))])
            wr.writerow(["direction_cv", repr(float(self.direction_cv))])
            wr.writerow(["profile_residual", repr(float(self.profile_residual))])
            wr.writerow(["cv_threshold", repr(float(self.cv_threshold))])
            wr.writerow(["residual_threshold", repr(float(self.residual_threshold))])


def symmetry_verdict(v: ExtensionField, cv_threshold=0.05, residual_threshold=0.05, collar=0.1,
                     bins=None) -> SymmetryVerdict:
    est = infer_direction(v, collar)
    if est.constant:
        # the y-profile is still emitted, binned along an arbitrary axis
        e1 = np.eye(v.grid.n)[0]
        fit = profile_fit(v, e1, bins, collar)
        return SymmetryVerdict(est.omega, 0.0, fit.residual, CONSTANT, cv_threshold, residual_threshold, fit)
    fit = profile_fit(v, est.omega, bins, collar)
    ok = est.direction_cv <= cv_threshold and fit.residual <= residual_threshold
    return SymmetryVerdict(est.omega, est.direction_cv, fit.residual, ONE_DIM if ok else NOT_ONE_DIM,
                           cv_threshold, residual_threshold, fit)


def trace_monotonicity(fit: ProfileFit, const_tol=1e-6, slack=1e-8) -> str:
    """'increasing', 'constant' or 'mixed' for the fitted trace profile u0 = v0 on level 0."""
    u0 = fit.v0[0]
    if np.ptp(u0) <= const_tol:
        return "constant"
    steps = np.diff(u0)
    if np.all(steps > -slack) and u0[-1] > u0[0]:
        return "increasing"
    return "mixed"
