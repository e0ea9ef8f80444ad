"""Minimisers and critical points of the discrete slab energy.

The discrete energy on the full box is

    E(v) = 1/2 v^T A v + sum_p mu_p (G(u_p) - c_u),

with A from :func:`slabdtn.grid.assemble_operator` and u = v on level 0.  Its
gradient ``A v - mu f(u) e_0`` is the discrete form of the semilinear problem
(div(y^a grad v) = 0 inside, -y^a v_y = f(v) at y = 0, v_y = 0 at y = 1).
Lateral Dirichlet nodes are held fixed; periodic boxes have no fixed nodes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fastsolve import SeparableSolver
from .grid import SlabGrid, ExtensionField, build_grid, dual_flux
from .nonlinearity import Nonlinearity

log = logging.getLogger(__name__)

ARMIJO = 1e-4
BACKTRACK = 0.5
DIRECT_LIMIT = 40_000


def default_tol(n: int) -> float:
    return 1e-6 if n >= 3 else 1e-8


@dataclass
class SolveReport:
    field: ExtensionField
    residual_norm: float
    iterations: int
    method: str
    energy_trace: list = field(default_factory=list)
    converged: bool = True
    message: str = ""
    init_kind: str = ""
    condition_estimate: float = float("nan")

    @property
    def values(self):
        return self.field.values


class SolveFailure(RuntimeError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class _Problem:
    """Energy, gradient and residual on a fixed grid with frozen lateral data."""

    def __init__(self, grid: SlabGrid, nl: Nonlinearity):
        self.grid = grid
        self.nl = nl
        self.A = grid.operator()
        self.mu = grid.lateral_measure()
        self.free = np.broadcast_to(grid.interior_mask(), grid.shape)
        self.mu_full = np.broadcast_to(self.mu, grid.shape)

    def matvec(self, values):
        return (self.A @ values.ravel()).reshape(self.grid.shape)

    def energy(self, values, Av=None):
        if Av is None:
            Av = self.matvec(values)
        quad = 0.5 * float(np.sum(values * Av))
        pot = float(np.sum(self.mu * self.nl.potential(values[0])))
        return quad + pot

    def gradient(self, values, Av):
        g = Av.copy()
        g[0] -= self.mu * self.nl.f(values[0])
        g[~self.free] = 0.0
        return g

    def residual_norm(self, g):
        return float(np.max(np.abs(g[self.free] / self.mu_full[self.free]))) if self.free.any() else 0.0

    def preconditioner(self):
        shift = max(-float(self.nl.fprime(self.nl.tau)), 0.1)
        solver = SeparableSolver(self.grid, trace_shift=shift)

        def apply(g):
            return solver.prolong(solver.solve(solver.restrict(g)))
        return apply

    def jacobian(self):
        """Free-node block of A - diag(mu f'(u)) on the trace."""
        idx = np.flatnonzero(self.free.ravel())
        return idx, self.A[idx][:, idx]


def _start(grid, nl, boundary, init):
    if init is None:
        init = ExtensionField.constant(grid, nl.tau)
    if init.grid is not grid:
        raise ValueError("initial field lives on a different grid")
    x = init.values.copy()
    if boundary is not None and not grid.periodic:
        data = boundary.values if isinstance(boundary, ExtensionField) else np.asarray(boundary, float)
        fixed = ~np.broadcast_to(grid.interior_mask(), grid.shape)
        x[fixed] = np.broadcast_to(data, grid.shape)[fixed]
    return x


def minimize(grid: SlabGrid, nl: Nonlinearity, boundary=None, init: ExtensionField = None,
             tol=None, max_iter=5000, init_kind="given", raise_on_failure=False) -> SolveReport:
    """Local minimiser by preconditioned nonlinear CG (Polak-Ribiere+) with Armijo backtracking.

    The preconditioner is the separable operator with the trace shifted by
    -f'(tau); a failed line search restarts along the preconditioned gradient.
    """
    if tol is None:
        tol = default_tol(grid.n)
    if tol <= 0:
        raise ValueError("tol must be positive")
    prob = _Problem(grid, nl)
    x = _start(grid, nl, boundary, init)
    Ax = prob.matvec(x)
    E = prob.energy(x, Ax)
    trace = [E]
    g = prob.gradient(x, Ax)
    res = prob.residual_norm(g)
    if res <= tol:
        return SolveReport(ExtensionField(grid, x), res, 0, "descent", trace, True, "initial field converged", init_kind)

    precond = prob.preconditioner()
    mu = prob.mu
    G = nl.G
    z = precond(g)
    d = -z
    gz = float(np.sum(g * z))
    it = 0
    message = "max_iter reached"
    converged = False
    while it < max_iter:
        it += 1
        gd = float(np.sum(g * d))
        if gd >= 0:
            d, gd = -z, -gz
        Ad = prob.matvec(d)
        d0 = d[0]
        curv = float(np.sum(d * Ad)) - float(np.sum(mu * nl.fprime(x[0]) * d0 * d0))
        alpha = -gd / curv if curv > 0 else 1.0
        xAd = float(np.sum(d * Ax))
        u0 = x[0]
        G0 = G(u0)
        accepted = False
        restarted = False
        while True:
            for _ in range(60):
                dE = alpha * xAd + 0.5 * alpha ** 2 * float(np.sum(d * Ad)) \
                    + float(np.sum(mu * (G(u0 + alpha * d0) - G0)))
                if dE <= ARMIJO * alpha * gd:
                    accepted = True
                    break
                alpha *= BACKTRACK
            if accepted or restarted:
                break
            # fall back to a plain preconditioned-gradient step
            restarted = True
            d, gd = -z, -gz
            Ad = prob.matvec(d)
            d0 = d[0]
            xAd = float(np.sum(d * Ax))
            alpha = 1.0
        if not accepted:
            message = "line search failed"
            break
        x = x + alpha * d
        Ax = Ax + alpha * Ad
        E = E + dE
        trace.append(E)
        g_new = prob.gradient(x, Ax)
        res = prob.residual_norm(g_new)
        if res <= tol:
            converged = True
            message = "converged"
            g = g_new
            break
        z_new = precond(g_new)
        gz_new = float(np.sum(g_new * z_new))
        beta = max(0.0, float(np.sum(g_new * (z_new - z))) / gz)
        d = -z_new + beta * d
        g, z, gz = g_new, z_new, gz_new
    rep = SolveReport(ExtensionField(grid, x), res, it, "descent", trace, converged, message, init_kind)
    log.debug("minimize: %s after %d iterations, residual %.3e", message, it, res)
    if not converged and raise_on_failure:
        raise SolveFailure(message, rep)
    return rep


def newton_solve(grid: SlabGrid, nl: Nonlinearity, boundary=None, init: ExtensionField = None,
                 tol=None, max_iter=50, init_kind="given", raise_on_failure=False) -> SolveReport:
    """Damped Newton on the discrete critical-point system.

    Linear steps are direct for small problems and MINRES with the separable
    preconditioner otherwise.  Damping halves the step until the residual
    2-norm decreases.
    """
    if tol is None:
        tol = default_tol(grid.n)
    prob = _Problem(grid, nl)
    x = _start(grid, nl, boundary, init)
    idx = np.flatnonzero(prob.free.ravel())
    A_ff = prob.A[idx][:, idx].tocsc()
    trace_pos = idx < int(np.prod(grid.lateral_shape))
    mu_free = prob.mu_full.ravel()[idx]
    precond = None
    Ax = prob.matvec(x)
    g = prob.gradient(x, Ax)
    res = prob.residual_norm(g)
    trace = [prob.energy(x, Ax)]
    it = 0
    cond = float("nan")
    message = "converged" if res <= tol else "max_iter reached"
    while res > tol and it < max_iter:
        it += 1
        dvals = np.where(trace_pos, -nl.fprime(x.ravel()[idx]) * mu_free, 0.0)
        J = (A_ff + sp.diags(dvals)).tocsc()
        rhs = -g.ravel()[idx]
        if idx.size <= DIRECT_LIMIT:
            try:
                step = spla.splu(J).solve(rhs)
            except RuntimeError as exc:
                cond = _condition(J)
                message = f"singular Jacobian ({exc})"
                break
        else:
            if precond is None:
                solver = SeparableSolver(grid, trace_shift=max(-float(nl.fprime(nl.tau)), 0.1))
                shape = solver.compact_shape

                def _pc(r):
                    return solver.solve(r.reshape(shape)).ravel()
                precond = spla.LinearOperator(J.shape, matvec=_pc, dtype=float)
            step, info = spla.minres(J, rhs, M=precond, rtol=1e-13, maxiter=2000)
            if info != 0:
                cond = _condition(J)
                message = f"linear solve did not converge (info={info})"
                break
        if not np.all(np.isfinite(step)):
            cond = _condition(J)
            message = "singular Jacobian (non-finite step)"
            break
        full_step = np.zeros(grid.size)
        full_step[idx] = step
        full_step = full_step.reshape(grid.shape)
        r0 = _scaled_l2(prob, g)
        alpha = 1.0
        while True:
            xt = x + alpha * full_step
            At = prob.matvec(xt)
            gt = prob.gradient(xt, At)
            if _scaled_l2(prob, gt) <= (1 - 1e-4 * alpha) * r0:
                break
            alpha *= 0.5
            if alpha < 1e-8:
                break
        if alpha < 1e-8:
            message = "damping stagnated (residual at roundoff level?)"
            break
        x, Ax, g = xt, At, gt
        res = prob.residual_norm(g)
        trace.append(prob.energy(x, Ax))
        if res <= tol:
            message = "converged"
    converged = res <= tol
    rep = SolveReport(ExtensionField(grid, x), res, it, "newton", trace, converged, message, init_kind, cond)
    if not converged and raise_on_failure:
        raise SolveFailure(message, rep)
    return rep


def _scaled_l2(prob, g):
    return float(np.sqrt(np.sum((g[prob.free] / prob.mu_full[prob.free]) ** 2)))


def _condition(J):
    if J.shape[0] <= 3000:
        return float(np.linalg.cond(J.toarray()))
    try:
        big = spla.eigsh(J, k=1, which="LM", return_eigenvectors=False)[0]
        small = spla.eigsh(J, k=1, sigma=0.0, which="LM", return_eigenvectors=False)[0]
        return float(abs(big) / max(abs(small), 1e-300))
    except Exception:  # diagnostics only
        return float("inf")


def residual_norm(v: ExtensionField, nl: Nonlinearity) -> float:
    prob = _Problem(v.grid, nl)
    Av = prob.matvec(v.values)
    return prob.residual_norm(prob.gradient(v.values, Av))


def energy_gradient(v: ExtensionField, nl: Nonlinearity) -> np.ndarray:
    """Gradient of the full-box energy with respect to every node value (fixed nodes included)."""
    prob = _Problem(v.grid, nl)
    Av = prob.matvec(v.values)
    g = Av.copy()
    g[0] -= prob.mu * nl.f(v.values[0])
    return g


def total_energy(v: ExtensionField, nl: Nonlinearity) -> float:
    return _Problem(v.grid, nl).energy(v.values)


def energy(v: ExtensionField, nl: Nonlinearity, R=None):
    """(Dirichlet part, potential part) of the energy over the sub-cylinder of half-width R."""
    grid = v.grid
    if R is not None:
        grid.check_radius(R)
    A = grid.operator(R)
    vals = v.values.ravel()
    dirichlet = 0.5 * float(vals @ (A @ vals))
    potential = float(np.sum(grid.lateral_measure(R) * nl.potential(v.trace)))
    return dirichlet, potential


def slab_grid_like(grid: SlabGrid, n: int) -> SlabGrid:
    return SlabGrid(n, grid.L, grid.N, grid.y, grid.a, grid.lateral_bc, grid.gamma_mesh)


def limit_profiles(v3d: ExtensionField, nl: Nonlinearity, tol=None, mono_tol=1e-8, axis=-1):
    """Profiles as x_n -> +-infinity, from the end slices re-solved on the (n-1)-dimensional grid.

    Returns (vbar, vunder, reports).  Raises ValueError if v3d is not
    nondecreasing along ``axis`` within ``mono_tol``.
    """
    grid = v3d.grid
    if grid.n < 2:
        raise ValueError("limit profiles need n >= 2")
    ax = (axis % grid.n) + 1
    drops = np.diff(v3d.values, axis=ax)
    if drops.min() < -mono_tol:
        raise ValueError(f"field is not monotone along x_{ax}: min increment {drops.min():.3e}")
    sub = slab_grid_like(grid, grid.n - 1)
    out = []
    reports = []
    for pick in (-1, 0):
        sl = np.take(v3d.values, pick, axis=ax)
        start = ExtensionField(sub, sl.copy())
        if residual_norm(start, nl) <= (tol if tol is not None else default_tol(sub.n)):
            rep = SolveReport(start, residual_norm(start, nl), 0, "descent", [], True, "slice already solved")
        else:
            rep = minimize(sub, nl, boundary=start, init=start, tol=tol)
            if not rep.converged:
                rep = newton_solve(sub, nl, boundary=start, init=rep.field, tol=tol)
        out.append(rep.field)
        reports.append(rep)
    return out[0], out[1], reports


def lateral_gradient(values: np.ndarray, grid: SlabGrid) -> np.ndarray:
    """Central differences in every lateral axis (one-sided on Dirichlet faces, wrapped if periodic)."""
    comps = []
    for k in range(grid.n):
        axis = k + 1
        if grid.periodic:
            comps.append((np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2 * grid.h))
        else:
            comps.append(np.gradient(values, grid.h, axis=axis))
    return np.stack(comps)


@dataclass
class GradientBound:
    sup_lateral: float
    sup_flux: float
    sup_f: float
    finite: bool
    refinement_growth: float = float("nan")
    refinement_ok: bool = True


def gradient_bound_check(v: ExtensionField, nl: Nonlinearity, refined: ExtensionField = None,
                         growth_limit=0.10) -> GradientBound:
    """Sup of |grad_x v| and of |y^a dv/dy| (via the discrete flux); optional two-grid growth test."""
    def sups(w):
        gl = lateral_gradient(w.values, w.grid)
        lat = float(np.max(np.sqrt(np.sum(gl ** 2, axis=0))))
        fl = dual_flux(w)
        flux = float(max(np.max(np.abs(fl.faces)), np.max(np.abs(fl.bottom[w.grid.interior_mask()]))))
        return lat, flux

    lat, flux = sups(v)
    sup_f = float(np.max(np.abs(nl.f(v.trace))))
    out = GradientBound(lat, flux, sup_f, bool(np.isfinite(lat) and np.isfinite(flux)))
    if refined is not None:
        lat2, flux2 = sups(refined)
        growth = max(lat2 / lat - 1.0 if lat > 0 else 0.0, flux2 / flux - 1.0 if flux > 0 else 0.0)
        out.refinement_growth = float(growth)
        out.refinement_ok = bool(growth < growth_limit)
    return out


def refine(grid: SlabGrid, factor: int = 2) -> SlabGrid:
    """Same box with lateral spacing and vertical cell count refined by ``factor``."""
    N = grid.N * factor if grid.periodic else (grid.N - 1) * factor + 1
    return build_grid(grid.n, grid.L, N, grid.M * factor, grid.gamma_mesh, grid.a, grid.lateral_bc)
