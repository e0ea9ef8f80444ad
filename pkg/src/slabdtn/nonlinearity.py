"""Boundary nonlinearities f with potential G' = -f."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import minimize_scalar


@dataclass(frozen=True)
class Nonlinearity:
    f: Callable
    fprime: Callable
    G: Callable
    holder_gamma: float = 1.0
    c_u: float = 0.0
    tau: float = 0.0
    name: str = "custom"

    def potential(self, u):
        """Gauged potential G(u) - c_u."""
        return self.G(u) - self.c_u

    def shifted(self, c: float) -> "Nonlinearity":
        """Same f with G + c; the recorded gauge c_u is kept."""
        G = self.G
        return replace(self, G=lambda u: G(u) + c, name=f"{self.name}+{c:g}")

    def with_tau(self, tau: float) -> "Nonlinearity":
        return replace(self, tau=float(tau))

    def gauged(self, lo: float, hi: float, prefer: str = "larger", samples: int = 2001) -> "Nonlinearity":
        """Set c_u = min G on [lo, hi] and tau to a minimiser (ties broken by ``prefer``)."""
        if hi < lo:
            raise ValueError("empty range")
        if hi - lo < 1e-14:
            t = 0.5 * (lo + hi)
            return replace(self, c_u=float(self.G(t)), tau=float(t))
        ts = np.linspace(lo, hi, samples)
        Gs = np.asarray(self.G(ts), dtype=float)
        cands = []
        step = ts[1] - ts[0]
        for i in np.nonzero(Gs <= Gs.min() + 1e-9 * max(1.0, abs(Gs.min())))[0]:
            a, b = max(lo, ts[i] - step), min(hi, ts[i] + step)
            res = minimize_scalar(self.G, bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-13})
            t = float(res.x) if res.fun <= Gs[i] else float(ts[i])
            cands.append((float(self.G(t)), t))
        c_u = min(c for c, _ in cands)
        ties = [t for c, t in cands if c <= c_u + 1e-12 * max(1.0, abs(c_u))]
        tau = max(ties) if prefer == "larger" else min(ties)
        return replace(self, c_u=float(c_u), tau=float(tau))

    def consistency_error(self, ts=None, h=1e-4) -> float:
        """max |(G(t+h) - G(t-h)) / 2h + f(t)|; O(h^2) for a consistent triple."""
        if ts is None:
            ts = np.linspace(-1.5, 1.5, 61)
        ts = np.asarray(ts, dtype=float)
        fd = (self.G(ts + h) - self.G(ts - h)) / (2 * h)
        return float(np.max(np.abs(fd + self.f(ts))))


def allen_cahn(tau: float = 1.0) -> Nonlinearity:
    """f(u) = u - u^3, G(u) = (1 - u^2)^2 / 4; wells at +-1 with G = 0."""
    if tau not in (-1.0, 1.0, -1, 1):
        raise ValueError("Allen-Cahn minimisers of G are -1 and +1")
    return Nonlinearity(
        f=lambda u: u - u ** 3,
        fprime=lambda u: 1.0 - 3.0 * u ** 2,
        G=lambda u: 0.25 * (1.0 - u ** 2) ** 2,
        holder_gamma=1.0,
        c_u=0.0,
        tau=float(tau),
        name="allen_cahn",
    )


def polynomial(coefficients) -> Nonlinearity:
    """f(u) = sum_k c_k u^k (ascending powers); G = -antiderivative with G(0) = 0.

    The gauge is set over the span of the real roots of f (or [-1, 1] when f
    has fewer than two), since the solution range is unknown beforehand.
    """
    coefficients = [float(c) for c in coefficients]
    if not coefficients:
        raise ValueError("need at least one coefficient")
    f = Polynomial(coefficients)
    fp = f.deriv()
    G = -f.integ()
    roots = np.sort([r.real for r in np.atleast_1d(f.roots()) if abs(r.imag) < 1e-12]) \
        if f.degree() > 0 else np.array([])
    lo, hi = (roots[0], roots[-1]) if roots.size >= 2 else (-1.0, 1.0)
    nl = Nonlinearity(f=lambda u: f(u), fprime=lambda u: fp(u), G=lambda u: G(u),
                      holder_gamma=1.0, name="polynomial(" + ",".join(f"{c:g}" for c in coefficients) + ")")
    return nl.gauged(float(lo), float(hi))


def zero() -> Nonlinearity:
    return Nonlinearity(f=np.zeros_like, fprime=np.zeros_like,
                        G=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
                        name="zero")
