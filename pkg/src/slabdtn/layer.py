"""One-dimensional layer solutions and the identities they satisfy."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .grid import ExtensionField, boundary_flux, build_grid
from .nonlinearity import Nonlinearity
from .solver import SolveReport, minimize, newton_solve


@dataclass(eq=False)
class LayerProfile:
    field: ExtensionField
    trace_monotone: bool
    limits: tuple
    hamiltonian_residual: float
    report: SolveReport = None

    @property
    def grid(self):
        return self.field.grid

    @property
    def trace(self):
        return self.field.trace


def _check_wells(nl: Nonlinearity, tol=1e-10):
    for w in (-1.0, 1.0):
        if abs(float(nl.f(w))) > tol:
            raise ValueError(f"G'({w:+g}) = {-float(nl.f(w)):.3e}: potential has no well at {w:+g}")


def transplant(profile: ExtensionField, grid, omega) -> ExtensionField:
    """Field on an n-dimensional grid equal to the 1-D ``profile`` along direction omega (constant beyond its ends)."""
    omega = np.asarray(omega, dtype=float)
    omega = omega / np.linalg.norm(omega)
    if profile.grid.M != grid.M or not np.allclose(profile.grid.y, grid.y):
        raise ValueError("profile and target grid need the same vertical levels")
    s = sum(w * X for w, X in zip(omega, grid.coords()))
    x1 = profile.grid.x
    vals = np.stack([np.interp(s, x1, profile.values[j]) for j in range(grid.M + 1)])
    return ExtensionField(grid, vals)


def compute_layer(nl: Nonlinearity, a: float, L: float, N: int, M: int, gamma_mesh=None,
                  tol=None, polish=True) -> LayerProfile:
    """Minimiser on [-L, L] with data -1, +1 at the ends, started from tanh(x/2).

    Raises ValueError if the potential has no wells at +-1, RuntimeError if the
    solve fails or the trace is not strictly increasing.
    """
    _check_wells(nl)
    grid = build_grid(1, L, N, M, gamma_mesh, a)
    start = np.tanh(grid.x / 2.0)
    start[0], start[-1] = -1.0, 1.0
    init = ExtensionField(grid, np.broadcast_to(start, grid.shape).copy())
    rep = minimize(grid, nl, init=init, tol=tol, init_kind="tanh")
    if not rep.converged:
        raise RuntimeError(f"layer solve failed: {rep.message}")
    if polish:
        pol = newton_solve(grid, nl, init=rep.field, tol=min(rep.residual_norm, 1e-11), max_iter=5)
        if pol.residual_norm < rep.residual_norm:
            rep = SolveReport(pol.field, pol.residual_norm, rep.iterations + pol.iterations, rep.method,
                              rep.energy_trace, True, rep.message + " + newton polish", "tanh")
    u = rep.field.trace
    mono = trace_increasing(u)
    if not mono:
        raise RuntimeError(f"layer trace not strictly increasing (min step {np.min(np.diff(u)):.3e})")
    prof = LayerProfile(rep.field, mono, (float(u[0]), float(u[-1])), float("nan"), rep)
    prof.hamiltonian_residual = hamiltonian_identity(prof, nl).residual
    return prof


def trace_increasing(u, slack=1e-12) -> bool:
    """Strictly increasing where resolvable: steps may dip to -slack where the tails saturate at roundoff."""
    steps = np.diff(u)
    core = np.abs(u[:-1]) < 1.0 - 1e-6
    return bool(np.min(steps) > -slack and np.all(steps[core] > 0))


def _vx(v: ExtensionField):
    return np.gradient(v.values, v.grid.h, axis=1)


def vertical_partials(v: ExtensionField):
    """Per-cell integrals (1/2) int t^a v_x^2 and (1/2) int t^a v_y^2, shape (M, N).

    The v_y part is q^2 / kappa with q = kappa (v_{j+1} - v_j), the exact cell
    integral of t^(-a) q^2; the v_x part splits W_j evenly between the cell's two levels.
    """
    grid = v.grid
    vx2 = _vx(v) ** 2
    W = grid.W[:, None]
    kap = grid.kappa[:, None]
    px = 0.5 * W * 0.5 * (vx2[:-1] + vx2[1:])
    py = 0.5 * kap * np.diff(v.values, axis=0) ** 2
    return px, py


@dataclass
class HamiltonianReport:
    x: np.ndarray
    w: np.ndarray
    gap: np.ndarray
    residual: float
    far_field: float
    flux: np.ndarray
    flux_error: float

    def write_csv(self, path, u):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "u", "flux", "w", "G_gap", "hamiltonian_residual"])
            for row in zip(self.x, u, self.flux, self.w, self.gap, np.abs(self.w - self.gap)):
                wr.writerow([repr(float(c)) for c in row])


def hamiltonian_identity(profile: LayerProfile, nl: Nonlinearity, far=0.9) -> HamiltonianReport:
    """w(x) = int_0^1 (t^a/2)(v_x^2 - v_y^2) dt against G(u(x)) - G(u(+L)); sup residual over x."""
    v = profile.field
    grid = v.grid
    px, py = vertical_partials(v)
    w = np.sum(px - py, axis=0)
    u = v.trace
    gap = nl.G(u) - nl.G(u[-1])
    res = float(np.max(np.abs(w - gap)[1:-1]))
    farmask = np.abs(grid.x) >= far * grid.L
    flux = boundary_flux(v)
    ferr = float(np.max(np.abs(flux - nl.f(u))[1:-1]))
    return HamiltonianReport(grid.x.copy(), w, gap, res, float(np.max(np.abs(w[farmask]))), flux, ferr)


def positivity_surrogate(profile: LayerProfile, nl: Nonlinearity) -> np.ndarray:
    """phi(x, y_k) = G(u(x)) - G(u(+L)) - eta(x, y_k), eta = int_0^{y_k} (t^a/2)(v_x^2 - v_y^2) dt.

    By the Hamiltonian identity phi vanishes on the top level; it is positive below.
    """
    px, py = vertical_partials(profile.field)
    eta = np.concatenate([np.zeros((1, px.shape[1])), np.cumsum(px - py, axis=0)])
    u = profile.trace
    return (nl.G(u) - nl.G(u[-1]))[None] - eta


@dataclass
class DoubleWellRecord:
    limits: tuple
    g_prime_at_limits: tuple
    g_min_gap: float
    phi_min: float
    wells_ok: bool
    interior_ok: bool
    phi_ok: bool
    consistent: bool

    @property
    def passed(self) -> bool:
        return self.wells_ok and self.interior_ok and self.phi_ok and self.consistent


def double_well_audit(nl: Nonlinearity, profile: LayerProfile, samples=401, well_tol=1e-6) -> DoubleWellRecord:
    lo, hi = profile.limits
    gp = (-float(nl.f(lo)), -float(nl.f(hi)))
    t = np.linspace(lo, hi, samples + 2)[1:-1]
    gmin = float(np.min(nl.G(t) - max(nl.G(lo), nl.G(hi))))
    phi = positivity_surrogate(profile, nl)
    # interior: lateral nodes off the Dirichlet ends, levels below the top
    pmin = float(np.min(phi[:-1, 1:-1]))
    consistent = nl.consistency_error(np.linspace(lo, hi, 41)) <= 1e-6
    return DoubleWellRecord((lo, hi), gp, gmin, pmin,
                            bool(max(abs(gp[0]), abs(gp[1])) <= well_tol),
                            bool(gmin > -1e-8), bool(pmin > -1e-6), bool(consistent))


def renormalize(values, m_low, m_high):
    """Affine map sending m_low to -1 and m_high to +1."""
    if m_high == m_low:
        raise ValueError("degenerate range")
    return 2.0 * (np.asarray(values, dtype=float) - m_low) / (m_high - m_low) - 1.0


@dataclass
class LimitProfileRecord:
    m: float
    m_tilde: float
    M_tilde: float
    M: float
    g_prime: tuple
    wells_ok: bool
    ordering_ok: bool
    lower_kind: str
    upper_kind: str
    lower_cv: float
    upper_cv: float

    @property
    def passed(self) -> bool:
        return self.wells_ok and self.lower_kind != "neither" and self.upper_kind != "neither"


def limit_profile_potential_audit(vbar: ExtensionField, vunder: ExtensionField, nl: Nonlinearity,
                                  well_tol=1e-4, const_tol=1e-6, cv_tol=0.05) -> LimitProfileRecord:
    from .symmetry import infer_direction  # local: symmetry imports this module's helpers

    ul, uh = vunder.trace, vbar.trace
    m, mt = float(np.min(ul)), float(np.max(ul))
    Mt, Mx = float(np.min(uh)), float(np.max(uh))
    gp = tuple(-float(nl.f(c)) for c in (m, mt, Mt, Mx))

    def kind(field):
        u = field.trace
        if np.ptp(u) <= const_tol:
            return "constant", 0.0
        est = infer_direction(field)
        return ("one_dimensional" if est.direction_cv <= cv_tol else "neither"), est.direction_cv

    lk, lcv = kind(vunder)
    uk, ucv = kind(vbar)
    return LimitProfileRecord(m, mt, Mt, Mx, gp, bool(max(abs(g) for g in gp) <= well_tol),
                              bool(m <= mt <= Mt <= Mx), lk, uk, lcv, ucv)
