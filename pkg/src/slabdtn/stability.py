"""Second variation of the energy on sub-cylinders and its principal eigenpair.

Q_R(xi) = xi^T A xi - sum_trace mu f'(u) xi^2 for xi vanishing on the lateral
faces of the sub-box, normalised by the trace mass sum mu xi^2.  The
eigenproblem is reduced onto the trace by a Schur complement, so the
constraint acts on the trace only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fastsolve import SeparableSolver
from .grid import ExtensionField, SlabGrid
from .nonlinearity import Nonlinearity
from .solver import lateral_gradient

DIRECT_LIMIT = 150_000
# relative level below which saturated tails of derivatives are roundoff
ROUNDOFF = 1e-10
ZERO_QUOTIENT = 1e-8


@dataclass(eq=False)
class StabilityForm:
    """Pair (A, B) on the unknowns of the sub-cylinder of half-width R (levels slowest)."""
    grid: SlabGrid
    R: float
    A: sp.csr_matrix
    B: np.ndarray
    d: np.ndarray
    index: np.ndarray
    n_trace: int

    @property
    def lateral_mask(self):
        return self.grid.interior_mask(self.R)

    @property
    def mu(self) -> float:
        return float(self.B[0])

    def to_field(self, vec) -> np.ndarray:
        out = np.zeros(self.grid.size)
        out[self.index] = vec
        return out.reshape(self.grid.shape)


def stability_form(v: ExtensionField, nl: Nonlinearity, R=None) -> StabilityForm:
    grid = v.grid
    R = grid.L if R is None else grid.check_radius(R)
    if grid.periodic and R >= grid.L:
        raise ValueError("stability form needs a sub-box with lateral faces (R < L) on periodic grids")
    mask = np.broadcast_to(grid.interior_mask(R), grid.shape)
    index = np.flatnonzero(mask.ravel())
    n_trace = int(np.count_nonzero(grid.interior_mask(R)))
    if n_trace == 0:
        raise ValueError("sub-box has no interior nodes")
    A_full = grid.operator()
    A = A_full[index][:, index].tocsr()
    mu = grid.lateral_measure().ravel()[index[:n_trace]]
    d = -np.asarray(nl.fprime(v.trace.ravel()[index[:n_trace]]), dtype=float)
    A = (A + sp.diags(np.concatenate([d * mu, np.zeros(index.size - n_trace)]))).tocsr()
    B = np.concatenate([mu, np.zeros(index.size - n_trace)])
    return StabilityForm(grid, float(R), A, B, d, index, n_trace)


class EigenFailure(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass
class Eigenpair:
    lam: float
    phi: np.ndarray          # on the form's unknowns
    residual: float
    rayleigh: float
    phi_min: float
    positive: bool
    history: list = field(default_factory=list)


def _shifted_solver(form: StabilityForm, shift: float):
    """Callable x -> (A - shift B)^{-1} x on the form's unknowns."""
    K = (form.A - shift * sp.diags(form.B)).tocsc()
    if K.shape[0] <= DIRECT_LIMIT:
        lu = spla.splu(K)
        return lu.solve
    grid = form.grid
    pre = SeparableSolver(grid, form.R, trace_shift=max(float(np.mean(form.d)) - shift, 0.1))
    shape = pre.compact_shape
    P = spla.LinearOperator(K.shape, matvec=lambda r: pre.solve(r.reshape(shape)).ravel(), dtype=float)

    def solve(b):
        x, info = spla.cg(K, b, M=P, rtol=1e-14, atol=0.0, maxiter=5000)
        if info != 0:
            raise EigenFailure(f"inner CG did not converge (info={info})", [])
        return x
    return solve


def principal_eigenpair(form: StabilityForm, tol=1e-12, maxiter=500) -> Eigenpair:
    """Smallest eigenvalue of A phi = lambda B phi by shift-and-invert on the trace Schur complement.

    The shift sits below min(d) - 1, under the whole spectrum, so the shifted
    operator is positive definite.  Lanczos (ARPACK) accelerates the inverse
    iteration; if it fails, plain inverse iteration with Rayleigh-quotient
    tracking runs and its history is attached to any failure.
    """
    nt = form.n_trace
    mu = form.B[:nt]
    shift = float(np.min(form.d)) - 1.0
    solve = _shifted_solver(form, shift)
    sq = np.sqrt(mu)
    zeros = np.zeros(form.A.shape[0] - nt)

    def op(x):
        # (S~ - shift)^{-1} with S~ = mu^{-1/2} S mu^{-1/2}
        return sq * solve(np.concatenate([sq * x, zeros]))[:nt]

    rng = np.random.default_rng(12345)
    v0 = np.abs(rng.standard_normal(nt)) + 1.0
    history = []
    psi = None
    if nt > 2:
        T = spla.LinearOperator((nt, nt), matvec=op, dtype=float)
        try:
            vals, vecs = spla.eigsh(T, k=1, which="LA", v0=v0, tol=tol * 1e-2, maxiter=maxiter,
                                    ncv=min(nt - 1, 40))
            psi = vecs[:, 0]
        except spla.ArpackNoConvergence:
            psi = None
    if psi is None:
        psi = v0 / np.linalg.norm(v0)
        for _ in range(maxiter):
            nxt = op(psi)
            nxt /= np.linalg.norm(nxt)
            psi_old, psi = psi, nxt
            history.append(_rayleigh(form, psi / sq))
            if len(history) > 1 and abs(history[-1] - history[-2]) <= tol * max(1.0, abs(history[-1])) \
                    and np.linalg.norm(psi - psi_old) < 1e-9:
                break
        else:
            raise EigenFailure("inverse iteration stagnated", history)
    phi_t = psi / sq
    phi = _extend(form, phi_t)
    norm = np.sqrt(float(np.sum(mu * phi[:nt] ** 2)))
    phi /= norm
    if np.sum(mu * phi[:nt]) < 0:
        phi = -phi
    lam = _rayleigh(form, phi[:nt])
    Bphi = form.B * phi
    res_vec = form.A @ phi - lam * Bphi
    residual = float(np.linalg.norm(res_vec) / np.linalg.norm(phi))
    pmin = float(np.min(phi))
    return Eigenpair(lam, phi, residual, lam, pmin, bool(pmin > 0), history)


def _interior_blocks(form: StabilityForm):
    cache = getattr(form, "_blocks", None)
    if cache is None:
        nt = form.n_trace
        A = form.A
        A_ii = A[nt:][:, nt:].tocsc()
        A_it = A[nt:][:, :nt].tocsr()
        if A_ii.shape[0] <= DIRECT_LIMIT:
            solve = spla.splu(A_ii).solve
        else:
            pre = SeparableSolver(form.grid, form.R, fix_trace=True)
            shape = pre.compact_shape

            def solve(b):
                return pre.solve(b.reshape(shape)).ravel()
        cache = (A_it, solve)
        form._blocks = cache
    return cache


def _extend(form: StabilityForm, phi_t):
    """Full vector with trace phi_t and interior minimising A (harmonic extension)."""
    A_it, solve = _interior_blocks(form)
    return np.concatenate([phi_t, -solve(A_it @ phi_t)])


def _rayleigh(form: StabilityForm, phi_t) -> float:
    phi = _extend(form, phi_t)
    return float(phi @ (form.A @ phi)) / float(np.sum(form.B[:form.n_trace] * phi_t ** 2))


@dataclass
class StabilityReport:
    radii: np.ndarray
    lam: np.ndarray
    phi_min: np.ndarray
    potential_trace: np.ndarray
    eig_tol: float
    nonincreasing: bool
    violations: list
    note: str = "strict decrease is tested as nonincreasing within 2*eig_tol"

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["R", "lambda", "phi_min"])
            for row in zip(self.radii, self.lam, self.phi_min):
                wr.writerow([repr(float(x)) for x in row])


def lambda_monotonicity(v: ExtensionField, nl: Nonlinearity, radii, eig_tol=1e-10) -> StabilityReport:
    radii = np.asarray(sorted(float(R) for R in radii))
    if radii.size < 2:
        raise ValueError("need at least 2 radii")
    lams, mins = [], []
    for R in radii:
        pair = principal_eigenpair(stability_form(v, nl, R))
        lams.append(pair.lam)
        mins.append(pair.phi_min)
    lams = np.asarray(lams)
    bad = [(float(radii[k]), float(radii[k + 1])) for k in range(radii.size - 1)
           if lams[k + 1] > lams[k] + 2 * eig_tol]
    d = -np.asarray(nl.fprime(v.trace), dtype=float)
    return StabilityReport(radii, lams, np.asarray(mins), d, eig_tol, not bad, bad)


def _axis_derivative(v: ExtensionField, axis: int) -> np.ndarray:
    return lateral_gradient(v.values, v.grid)[axis % v.grid.n]


def _core_mask(grid, width=1):
    """Lateral nodes at least ``width`` cells away from a Dirichlet face."""
    if grid.periodic:
        return np.ones(grid.lateral_shape, dtype=bool)
    idx = np.arange(grid.N)
    core = (idx >= width) & (idx <= grid.N - 1 - width)
    out = core
    for _ in range(grid.n - 1):
        out = np.logical_and.outer(out, core)
    return out


@dataclass
class MonotoneStableRecord:
    status: str            # ok | degenerate | not_positive
    phi_min: float
    linearized_residual: float
    h: float


def monotone_implies_stable_check(v: ExtensionField, nl: Nonlinearity, axis=-1) -> MonotoneStableRecord:
    """phi = central difference of v along ``axis``: positivity and the linearised equation residual.

    The residual is max |(A phi)/mu - f'(u) phi e_0| over nodes two cells away
    from Dirichlet faces, relative to max |phi|.
    """
    grid = v.grid
    phi = _axis_derivative(v, axis)
    scale = float(np.max(np.abs(phi)))
    if scale <= 1e-12:
        return MonotoneStableRecord("degenerate", 0.0, 0.0, grid.h)
    inner = _core_mask(grid, 1)
    pmin = float(np.min(phi[:, inner]))
    positive = pmin > -ROUNDOFF * scale
    r = (grid.operator() @ phi.ravel()).reshape(grid.shape)
    r[0] -= grid.lateral_measure() * nl.fprime(v.trace) * phi[0]
    core = _core_mask(grid, 2)
    mu = grid.lateral_measure()
    res = float(np.max(np.abs(r[:, core] / mu[core]))) / scale
    return MonotoneStableRecord("ok" if positive else "not_positive", pmin, res, grid.h)


@dataclass
class LiouvilleQuotient:
    direction: int
    sigma: np.ndarray        # values on the retained nodes
    nodes: np.ndarray        # (count, 1 + n) integer indices (level, lateral...)
    coefficient_of_variation: float
    mean: float
    status: str = "ok"

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            n = self.nodes.shape[1] - 1
            wr.writerow(["level"] + [f"i{k + 1}" for k in range(n)] + ["sigma"])
            for idx, s in zip(self.nodes, self.sigma):
                wr.writerow([int(i) for i in idx] + [repr(float(s))])
            wr.writerow(["cv", repr(float(self.coefficient_of_variation))])


def liouville_quotient(v: ExtensionField, phi: np.ndarray, i: int, collar=0.1, floor=1e-3) -> LiouvilleQuotient:
    """sigma_i = d_i v / phi on nodes outside a ``collar`` fraction of the box and where phi >= floor * max phi.

    Raises ValueError if phi is nonpositive on a retained node region.
    """
    grid = v.grid
    phi = np.asarray(phi, dtype=float)
    if phi.shape != grid.shape:
        raise ValueError("phi must be a full field on the grid")
    dv = _axis_derivative(v, i)
    x = grid.x
    keep1 = np.abs(x) <= (1.0 - collar) * grid.L + 1e-12
    if not grid.periodic:
        keep1 &= (np.arange(grid.N) > 0) & (np.arange(grid.N) < grid.N - 1)
    lat = keep1
    for _ in range(grid.n - 1):
        lat = np.logical_and.outer(lat, keep1)
    region = np.broadcast_to(lat, grid.shape)
    if np.max(np.abs(dv[region])) <= 1e-12 and np.max(np.abs(phi[region])) <= 1e-12:
        nodes = np.argwhere(region)
        return LiouvilleQuotient(i, np.zeros(len(nodes)), nodes, 0.0, 0.0, "degenerate")
    top = float(np.max(phi[region]))
    if top <= 0 or np.min(phi[region]) < -ROUNDOFF * top:
        raise ValueError("phi is not positive on the interior")
    sel = region & (phi >= floor * top)
    nodes = np.argwhere(sel)
    sigma = dv[sel] / phi[sel]
    mean = float(np.mean(sigma))
    std = float(np.std(sigma))
    if max(abs(mean), std) <= ZERO_QUOTIENT:
        # d_i v vanishes against phi: the zero quotient is constant
        return LiouvilleQuotient(i, sigma, nodes, 0.0, mean, "zero")
    cv = std / abs(mean) if abs(mean) > 1e-300 else float("inf")
    return LiouvilleQuotient(i, sigma, nodes, cv, mean)
