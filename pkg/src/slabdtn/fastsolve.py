"""Direct solver for the separable part of the slab operator.

On the lateral interior of a box (zero Dirichlet data on its faces) or on a
full periodic box, the operator is ``Lap_h (x) diag(omega) + mu * I (x) K``.
A sine (resp. Fourier) transform in the lateral axes decouples it into one
tridiagonal column problem per mode.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .grid import SlabGrid
from .tridiag import solve_tridiagonal


class SeparableSolver:
    """Solve ``(A_ff + trace_shift * mu * E_trace) x = r`` on a box interior.

    ``fix_trace`` drops level 0 from the unknowns (the caller moves the
    coupling to the known trace into the right-hand side).
    """

    def __init__(self, grid: SlabGrid, R=None, fix_trace=False, trace_shift=0.0):
        self.grid = grid
        self.R = R
        self.fix_trace = bool(fix_trace)
        self.trace_shift = float(trace_shift)
        self.fourier = grid.periodic and (R is None or R >= grid.L)
        inside = np.nonzero(_axis_inside(grid, R))[0]
        if inside.size == 0:
            raise ValueError("sub-box has no interior nodes")
        self.slice = slice(int(inside[0]), int(inside[-1]) + 1)
        self.K = inside.size
        self.levels = np.arange(1 if self.fix_trace else 0, grid.M + 1)

        n, h = grid.n, grid.h
        mu = h ** n
        self.mu = mu
        lam = self._lateral_eigenvalues()
        om = grid.omega[self.levels].reshape((-1,) + (1,) * n)
        kap = np.concatenate([[0.0], grid.kappa, [0.0]])
        j = self.levels
        vert = mu * (kap[j] + kap[j + 1])
        diag = h ** (n - 2) * lam[None] * om + vert.reshape((-1,) + (1,) * n)
        if not self.fix_trace:
            diag[0] = diag[0] + mu * self.trace_shift
            if self.fourier and self.trace_shift == 0.0:
                # constant mode is singular; pinning its trace value picks the
                # solution with zero bottom mean, valid for compatible data
                diag[0][lam == 0.0] += mu
        self.diag = diag
        self.off = (-mu * grid.kappa[j[:-1]]).reshape((-1,) + (1,) * n)

    def _lateral_eigenvalues(self):
        n = self.grid.n
        if self.fourier:
            N = self.grid.N
            per_axis = [2.0 - 2.0 * np.cos(2 * np.pi * np.arange(N) / N)] * (n - 1)
            per_axis.append(2.0 - 2.0 * np.cos(2 * np.pi * np.arange(N // 2 + 1) / N))
        else:
            m = np.arange(1, self.K + 1)
            per_axis = [2.0 - 2.0 * np.cos(np.pi * m / (self.K + 1))] * n
        lam = per_axis[0]
        for e in per_axis[1:]:
            lam = np.add.outer(lam, e)
        return np.asarray(lam)

    @property
    def compact_shape(self):
        return (self.levels.size,) + (self.K,) * self.grid.n

    def restrict(self, full):
        """Unknown block of a full-shape array."""
        sl = (slice(None),) + (self.slice,) * self.grid.n
        return full[self.levels[0]:][sl]

    def prolong(self, compact, out=None):
        if out is None:
            out = np.zeros(self.grid.shape)
        sl = (slice(None),) + (self.slice,) * self.grid.n
        out[self.levels[0]:][sl] = compact
        return out

    def solve(self, r):
        r = np.asarray(r, dtype=float)
        if r.shape != self.compact_shape:
            raise ValueError(f"rhs shape {r.shape} != {self.compact_shape}")
        axes = tuple(range(1, self.grid.n + 1))
        if self.fourier:
            rh = sfft.rfftn(r, axes=axes)
            xh = solve_tridiagonal(self.off, self.diag, self.off, rh)
            return sfft.irfftn(xh, s=r.shape[1:], axes=axes)
        rh = sfft.dstn(r, type=1, axes=axes, norm="ortho")
        xh = solve_tridiagonal(self.off, self.diag, self.off, rh)
        return sfft.idstn(xh, type=1, axes=axes, norm="ortho")


def _axis_inside(grid, R):
    limit = grid.L if R is None else grid.check_radius(R)
    if R is None and grid.periodic:
        return np.ones(grid.N, dtype=bool)
    return np.abs(grid.x) < limit - 1e-9 * grid.h
