"""Independent reference computations used to check the fast paths.

Each oracle follows a different route from the production code: dense
cell-by-cell assembly, closed-form Bessel symbols, dense eigensolvers.
"""

from __future__ import annotations

import itertools

import numpy as np
import scipy.linalg as sla
from scipy.special import gamma as Gamma, ive, kve


def dense_operator(grid, R=None):
    """Energy Hessian built cell by cell from the exact cell integrals.

    Every lateral hypercube times vertical cell contributes, with
    q = h^(n-1) / 2^(n-1) per lateral edge and c = h^n / 2^n per corner:
    (W_j / 2) q / h (dv)^2 on each lateral edge at both levels, and
    c kappa_j (dv)^2 on each vertical corner edge.
    """
    n, N, h = grid.n, grid.N, grid.h
    M = grid.M
    lat = N ** n
    H = np.zeros((lat * (M + 1), lat * (M + 1)))
    x = grid.x
    limit = grid.L if R is None else float(R)
    tol = 1e-9 * h
    if grid.periodic and (R is None or limit >= grid.L):
        starts = range(N)

        def nxt(i):
            return (i + 1) % N
        inside = None
    else:
        starts = range(N - 1)

        def nxt(i):
            return i + 1
        inside = (x >= -limit - tol) & (x <= limit + tol)

    def node(idx, level):
        return level * lat + int(np.ravel_multi_index(idx, (N,) * n))

    def add(p, q, w):
        H[p, p] += w
        H[q, q] += w
        H[p, q] -= w
        H[q, p] -= w

    edge_w = h ** (n - 1) / 2 ** (n - 1) / h
    corner_w = h ** n / 2 ** n
    for base in itertools.product(starts, repeat=n):
        corners = [tuple(nxt(b) if s else b for b, s in zip(base, bits))
                   for bits in itertools.product((0, 1), repeat=n)]
        if inside is not None and not all(inside[i] for c in corners for i in c):
            continue
        for j in range(M):
            W, kap = grid.W[j], grid.kappa[j]
            for c in corners:
                add(node(c, j), node(c, j + 1), corner_w * kap)
            for k in range(n):
                for c in corners:
                    if c[k] != base[k]:
                        continue
                    d = list(c)
                    d[k] = nxt(base[k])
                    d = tuple(d)
                    for level in (j, j + 1):
                        add(node(c, level), node(d, level), 0.5 * W * edge_w)
    return H


def bessel_symbol(a, rho):
    """Continuum symbol of the slab DtN operator with depth 1, via modified Bessel functions.

    With nu = (1 - a) / 2, theta(y) = y^nu (A I_{-nu}(rho y) + B K_nu(rho y)) up to
    normalisation; imposing theta(0) = 1 and theta'(1) = 0 gives the closed form below.
    """
    nu = (1.0 - a) / 2.0
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    out = np.zeros_like(rho)
    pos = rho > 0
    r = rho[pos]
    ratio = kve(1.0 - nu, r) / ive(nu - 1.0, r) * np.exp(-2.0 * r)
    out[pos] = 4.0 ** (1.0 - nu) * r ** (2.0 * nu) / Gamma(nu) * (Gamma(1.0 - nu) / 2.0 - ratio / Gamma(nu))
    return out


def half_space_constant(a):
    """Limit of sigma(rho) / rho^(1-a) as rho -> infinity: 2^(1-2s) Gamma(1-s) / Gamma(s), s = (1-a)/2."""
    s = (1.0 - a) / 2.0
    return 2.0 ** (1.0 - 2.0 * s) * Gamma(1.0 - s) / Gamma(s)


def dense_principal_eigenvalue(form):
    """Smallest generalised eigenvalue of the stability pair via a dense trace Schur complement."""
    nt = form.n_trace
    A = form.A.toarray()
    S = A[:nt, :nt] - A[:nt, nt:] @ np.linalg.solve(A[nt:, nt:], A[nt:, :nt])
    return float(sla.eigh(S, np.diag(form.B[:nt]), eigvals_only=True)[0])
