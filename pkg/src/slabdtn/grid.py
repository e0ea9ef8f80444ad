"""Tensor-product slab grids and the weighted finite-volume operator.

The slab is ``[-L, L]^n x (0, 1)``.  Field arrays have shape
``(M + 1, N, ..., N)``: the vertical level is the slowest axis and level 0 is
the trace ``{y = 0}``.  All couplings in ``y`` come from closed-form cell
integrals of ``y**a`` and ``y**-a``, so the singular or degenerate weight is
never sampled at ``y = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.sparse as sp

DIRICHLET = "dirichlet"
PERIODIC = "periodic"
LATERAL_BCS = (DIRICHLET, PERIODIC)

# node coordinates are compared with this relative slack when matching R
_ALIGN_TOL = 1e-9


def check_exponent(a: float) -> float:
    a = float(a)
    if not (-1.0 < a < 1.0):
        raise ValueError(f"weight exponent a={a} must lie in the open interval (-1, 1)")
    return a


def fractional_order(a: float) -> float:
    """s = (1 - a) / 2, the order of the fractional Laplacian matched at high frequency."""
    return (1.0 - check_exponent(a)) / 2.0


def default_gamma(a: float) -> float:
    return 2.0 if abs(a) >= 0.5 else 1.0


def graded_levels(M: int, gamma_mesh: float) -> np.ndarray:
    return (np.arange(M + 1) / M) ** gamma_mesh


def face_conductances(y, a):
    """kappa_{j+1/2} = 1 / int_{y_j}^{y_{j+1}} t^-a dt."""
    y = np.asarray(y, dtype=float)
    p = 1.0 - a
    return p / (y[1:] ** p - y[:-1] ** p)


def band_weights(y, a):
    """W_j = int_{y_j}^{y_{j+1}} t^a dt."""
    y = np.asarray(y, dtype=float)
    p = 1.0 + a
    return (y[1:] ** p - y[:-1] ** p) / p


def level_weights(W):
    """Trapezoidal split of the band weights onto levels: half of each band to either side."""
    W = np.asarray(W, dtype=float)
    omega = np.zeros(W.size + 1)
    omega[:-1] += 0.5 * W
    omega[1:] += 0.5 * W
    return omega


def flux_levels(y, a):
    """Height in each cell that the discrete flux -kappa (v_{j+1} - v_j) represents.

    The balance of each band splits its weight W_j evenly between the two
    levels, so the face flux sits where int_0^t s^a ds reaches the midpoint of
    the band's weight: t^(1+a) = (y_j^(1+a) + y_{j+1}^(1+a)) / 2.
    """
    y = np.asarray(y, dtype=float)
    p = 1.0 + a
    return (0.5 * (y[:-1] ** p + y[1:] ** p)) ** (1.0 / p)


@dataclass(frozen=True, eq=False)
class SlabGrid:
    n: int
    L: float
    N: int
    y: np.ndarray
    a: float
    lateral_bc: str = DIRICHLET
    gamma_mesh: float = 1.0
    kappa: np.ndarray = field(init=False, repr=False)
    W: np.ndarray = field(init=False, repr=False)
    omega: np.ndarray = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"lateral dimension n={self.n} must be 1, 2 or 3")
        check_exponent(self.a)
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.N < 2:
            raise ValueError("need N >= 2 lateral nodes per axis")
        if self.lateral_bc not in LATERAL_BCS:
            raise ValueError(f"lateral_bc must be one of {LATERAL_BCS}")
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.size < 3:
            raise ValueError("need at least M = 2 vertical cells")
        if y[0] != 0.0 or y[-1] != 1.0 or np.any(np.diff(y) <= 0):
            raise ValueError("levels must increase strictly from 0 to 1")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        for name, arr in (("kappa", face_conductances(y, self.a)),
                          ("W", band_weights(y, self.a))):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        omega = level_weights(self.W)
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)

    @property
    def M(self) -> int:
        return self.y.size - 1

    @property
    def s(self) -> float:
        return fractional_order(self.a)

    @property
    def periodic(self) -> bool:
        return self.lateral_bc == PERIODIC

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.N if self.periodic else self.N - 1)

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @property
    def lateral_shape(self) -> tuple:
        return (self.N,) * self.n

    @property
    def shape(self) -> tuple:
        return (self.M + 1,) + self.lateral_shape

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def coords(self):
        """Lateral coordinate arrays, one per axis, each of lateral shape."""
        return np.meshgrid(*([self.x] * self.n), indexing="ij")

    def axis_widths(self, R=None) -> np.ndarray:
        """Per-axis quadrature widths of the (sub-)box ``[-R, R]``: h inside, h/2 on its faces, 0 outside."""
        h = self.h
        if R is None or (self.periodic and R >= self.L):
            c = np.full(self.N, h)
            if not self.periodic:
                c[0] = c[-1] = 0.5 * h
            return c
        R = self.check_radius(R)
        ax = np.abs(self.x)
        tol = _ALIGN_TOL * h
        c = np.where(ax < R - tol, h, 0.0)
        c[np.abs(ax - R) <= tol] = 0.5 * h
        return c

    def check_radius(self, R) -> float:
        R = float(R)
        if R > self.L * (1 + _ALIGN_TOL):
            raise ValueError(f"sub-box half-width R={R} exceeds L={self.L}")
        if R <= 0:
            raise ValueError("R must be positive")
        tol = _ALIGN_TOL * self.h
        x = self.x
        if not (np.any(np.abs(x - R) <= tol) and np.any(np.abs(x + R) <= tol)):
            raise ValueError(f"R={R} is not aligned with the lateral nodes (h={self.h})")
        return R

    def lateral_measure(self, R=None) -> np.ndarray:
        widths = self.axis_widths(R)
        return reduce(np.multiply.outer, [widths] * self.n)

    def interior_mask(self, R=None) -> np.ndarray:
        """Lateral nodes strictly inside the (sub-)box; all nodes for a periodic full box."""
        if R is None and self.periodic:
            return np.ones(self.lateral_shape, dtype=bool)
        limit = self.L if R is None else self.check_radius(R)
        inside = np.abs(self.x) < limit - _ALIGN_TOL * self.h
        return reduce(np.logical_and.outer, [inside] * self.n)

    def free_mask(self) -> np.ndarray:
        """Full-shape mask of unknowns: lateral Dirichlet nodes are eliminated on every level."""
        return np.broadcast_to(self.interior_mask(), self.shape)

    def operator(self, R=None):
        key = ("A", None if R is None else float(R))
        A = self._cache.get(key)
        if A is None:
            A = assemble_operator(self, R)
            self._cache[key] = A
        return A

    def with_exponent(self, a: float) -> "SlabGrid":
        return SlabGrid(self.n, self.L, self.N, self.y, a, self.lateral_bc, self.gamma_mesh)


def build_grid(n: int, L: float, N: int, M: int, gamma_mesh=None, a: float = 0.0,
               lateral_bc: str = DIRICHLET) -> SlabGrid:
    a = check_exponent(a)
    if M < 2:
        raise ValueError("need M >= 2 vertical cells")
    if N < 2:
        raise ValueError("need N >= 2 lateral nodes")
    if gamma_mesh is None:
        gamma_mesh = default_gamma(a)
    if gamma_mesh < 1:
        raise ValueError("gamma_mesh must be >= 1")
    return SlabGrid(int(n), float(L), int(N), graded_levels(int(M), float(gamma_mesh)), a,
                    lateral_bc, float(gamma_mesh))


def _path_laplacian(mask_nodes, periodic_full):
    """Unweighted 1-D graph Laplacian on the edges whose two endpoints carry weight."""
    N = mask_nodes.size
    i = np.arange(N - 1)
    keep = mask_nodes[i] & mask_nodes[i + 1]
    tail, head = i[keep], i[keep] + 1
    if periodic_full:
        tail = np.append(tail, N - 1)
        head = np.append(head, 0)
    ones = np.ones(tail.size)
    adj = sp.coo_matrix((ones, (tail, head)), shape=(N, N))
    adj = adj + adj.T
    deg = np.asarray(adj.sum(axis=1)).ravel()
    return (sp.diags(deg) - adj).tocsr()


def lateral_laplacian(grid: SlabGrid, R=None):
    """Matrix of sum over lateral edges of (edge cross-section / h) * (v_q - v_p)^2."""
    widths = grid.axis_widths(R)
    periodic_full = grid.periodic and (R is None or R >= grid.L)
    path = _path_laplacian(widths > 0, periodic_full)
    diag = sp.diags(widths)
    total = None
    for k in range(grid.n):
        factors = [path if l == k else diag for l in range(grid.n)]
        term = reduce(lambda A, B: sp.kron(A, B, format="csr"), factors)
        total = term if total is None else total + term
    return (total / grid.h).tocsr()


def vertical_stiffness(kappa):
    M = kappa.size
    main = np.zeros(M + 1)
    main[:-1] += kappa
    main[1:] += kappa
    return sp.diags([-kappa, main, -kappa], [-1, 0, 1], format="csr")


def assemble_operator(grid: SlabGrid, R=None):
    """Hessian of the Dirichlet half of the energy, 1/2 * int y^a |grad v|^2, over the (sub-)box.

    Lateral differences in band j carry W_j split evenly onto its two levels;
    vertical differences carry kappa_{j+1/2} times the lateral node measure.
    """
    lat = lateral_laplacian(grid, R)
    mu = grid.lateral_measure(R).ravel()
    A = sp.kron(sp.diags(grid.omega), lat, format="csr") \
        + sp.kron(vertical_stiffness(grid.kappa), sp.diags(mu), format="csr")
    A = A.tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


@dataclass(frozen=True, eq=False)
class ExtensionField:
    grid: SlabGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ValueError(f"field shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def trace(self) -> np.ndarray:
        return self.values[0]

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_trace_profile(cls, grid, fn):
        """Field equal to fn(x_1, ..., x_n) on every level."""
        u = np.asarray(fn(*grid.coords()), dtype=float)
        return cls(grid, np.broadcast_to(u, grid.shape).copy())


@dataclass(frozen=True, eq=False)
class FluxField:
    """Discrete w = -y^a dv/dy: one value per vertical cell, plus the fluxes through y = 0 and y = 1."""
    grid: SlabGrid
    faces: np.ndarray
    bottom: np.ndarray
    top: np.ndarray = None

    @property
    def face_levels(self) -> np.ndarray:
        return flux_levels(self.grid.y, self.grid.a)


def apply_neumann_flux(grid: SlabGrid, g) -> np.ndarray:
    """Load vector for -y^a dv/dy = g on {y=0}; the top carries the natural no-flux closure."""
    g = np.asarray(g, dtype=float)
    if g.shape != grid.lateral_shape:
        raise ValueError(f"flux data shape {g.shape} does not match lateral shape {grid.lateral_shape}")
    load = np.zeros(grid.shape)
    load[0] = g * grid.lateral_measure()
    return load


def _balance_per_area(v: ExtensionField) -> np.ndarray:
    grid = v.grid
    Av = (grid.operator() @ v.values.ravel()).reshape(grid.shape)
    mu = grid.lateral_measure()
    out = np.zeros(grid.shape)
    np.divide(Av, mu, out=out, where=np.broadcast_to(mu > 0, grid.shape))
    return out


def boundary_flux(v: ExtensionField) -> np.ndarray:
    """Discrete Neumann datum realised by v on {y=0}: bottom rows of A v per unit lateral area."""
    return _balance_per_area(v)[0]


def dual_flux(v: ExtensionField) -> FluxField:
    """Cell fluxes -kappa (v_{j+1} - v_j), the realised bottom datum, and the flux through y = 1.

    The top value is what the top half-cell balance leaves over; the no-flux
    closure makes it vanish for solved fields.
    """
    grid = v.grid
    kap = grid.kappa.reshape((-1,) + (1,) * grid.n)
    faces = -kap * np.diff(v.values, axis=0)
    bal = _balance_per_area(v)
    return FluxField(grid, faces, bal[0], -bal[-1])


def dual_grid(grid: SlabGrid) -> SlabGrid:
    """Grid for w: levels 0, the flux level of every cell, and 1; exponent -a."""
    y = np.concatenate([[0.0], flux_levels(grid.y, grid.a), [1.0]])
    return SlabGrid(grid.n, grid.L, grid.N, y, -grid.a, grid.lateral_bc, grid.gamma_mesh)


def duality_residual(w: FluxField) -> float:
    """Max interior residual of div(y^-a grad w) = 0 with w = bottom flux at y=0 and w = 0 at y=1.

    Rows are flux balances per unit lateral area over the dual cells.
    """
    grid = w.grid
    dgrid = dual_grid(grid)
    vals = np.concatenate([w.bottom[None], w.faces, np.zeros((1,) + grid.lateral_shape)])
    r = (dgrid.operator() @ vals.ravel()).reshape(dgrid.shape)
    mu = dgrid.lateral_measure()
    rows = r[1:-1][:, dgrid.interior_mask()] / mu[dgrid.interior_mask()]
    return float(np.max(np.abs(rows)))
