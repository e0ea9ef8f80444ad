"""The acceptance suite: ten quantitative checks, each with its own tolerance and time budget."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .energy import nested_energies
from .grid import DIRICHLET, PERIODIC, ExtensionField, build_grid
from .layer import compute_layer, hamiltonian_identity, transplant
from .nonlinearity import allen_cahn
from .oracles import dense_operator, dense_principal_eigenvalue
from .runner import duality_study
from .solver import energy_gradient, lateral_gradient, minimize, total_energy
from .stability import lambda_monotonicity, liouville_quotient, principal_eigenpair, stability_form
from .symbol import stabilized_slope, symbol_at
from .symmetry import NOT_ONE_DIM, symmetry_verdict


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:2d} {self.title}: {self.detail} ({self.seconds:.1f} s, budget {self.budget:g} s)"


def _timed(number, title, budget, body):
    t0 = time.perf_counter()
    ok, detail = body()
    dt = time.perf_counter() - t0
    return CriterionResult(number, title, bool(ok) and dt < budget, detail, dt, budget)


def criterion_1():
    def body():
        rhos = np.array([0.5, 1.0, 2.0, 5.0, 10.0])
        errs = [abs(symbol_at(0.0, r, 2000) / (r * np.tanh(r)) - 1.0) for r in rhos]
        return max(errs) <= 1e-5, f"max rel err vs rho tanh rho {max(errs):.2e} (limit 1e-05)"
    return _timed(1, "symbol anchor", 1.0, body)


def criterion_2():
    def body():
        parts, ok = [], True
        for a in (-0.5, 0.0, 0.5):
            slope, hist = stabilized_slope(a, 10.0, 100.0)
            ok &= abs(slope - (1.0 - a)) <= 0.05
            parts.append(f"a={a:+.1f}: {slope:.4f} (M={hist[-1][0]})")
        return ok, "free slopes " + ", ".join(parts) + " vs 1-a +- 0.05"
    return _timed(2, "symbol asymptotics", 30.0, body)


def criterion_3():
    def body():
        parts, ok = [], True
        for a in (-0.5, 0.5):
            rows = duality_study(a, refinements=2)
            res = np.array([r[2] for r in rows])
            ratios = res[:-1] / res[1:]
            ok &= bool(np.all(ratios >= 1.5))
            parts.append(f"a={a:+.1f}: ratios " + "/".join(f"{x:.2f}" for x in ratios))
        return ok, ", ".join(parts) + " (need >= 1.5)"
    return _timed(3, "duality", 60.0, body)


def criterion_4():
    def body():
        nl = allen_cahn()
        parts, ok = [], float(nl.G(1.0)) == float(nl.G(-1.0))
        for a in (-0.5, 0.0, 0.5):
            coarse = hamiltonian_identity(compute_layer(nl, a, 20.0, 161, 16), nl)
            fine = hamiltonian_identity(compute_layer(nl, a, 20.0, 321, 32), nl)
            ratio = coarse.residual / fine.residual
            far = max(coarse.far_field, fine.far_field)
            ok &= ratio >= 1.5 and far <= 0.05
            parts.append(f"a={a:+.1f}: ratio {ratio:.2f}, far |w| {far:.1e}")
        return ok, ", ".join(parts) + "; G(1)=G(-1) exact"
    return _timed(4, "hamiltonian identity", 120.0, body)


def layer_minimizer_2d(L=64.0, N=257, M=12):
    """n = 2, a = 0 minimiser with data and start tanh(x_2 / 2)."""
    nl = allen_cahn()
    grid = build_grid(2, L, N, M, None, 0.0)
    start = ExtensionField.from_trace_profile(grid, lambda x1, x2: np.tanh(x2 / 2.0))
    return nl, minimize(grid, nl, start, start)


def criterion_5():
    def body():
        nl, rep = layer_minimizer_2d()
        en = nested_energies(rep.field, nl, [4, 8, 16, 32])
        ok = rep.converged and abs(en.fitted_exponent - 1.0) <= 0.3
        return ok, (f"exponent {en.fitted_exponent:.4f} +- {2 * en.exponent_stderr:.1e} (need 1 +- 0.3), "
                    f"solve residual {rep.residual_norm:.1e}")
    return _timed(5, "minimizer energy growth", 600.0, body)


def criterion_6():
    def body():
        nl = allen_cahn()
        grid = build_grid(3, 24.0, 49, 8, None, 0.0)
        start = ExtensionField.from_trace_profile(grid, lambda x1, x2, x3: np.tanh(x3 / 2.0))
        rep = minimize(grid, nl, start, start)
        steps = np.diff(rep.values, axis=3)
        monotone = steps.min() >= -1e-8
        en = nested_energies(rep.field, nl, [4, 8, 16])
        ok = rep.converged and monotone and abs(en.fitted_exponent - 2.0) <= 0.4
        return ok, (f"exponent {en.fitted_exponent:.4f} (need 2 +- 0.4), monotone in x3: {monotone}, "
                    f"N=49, L=24")
    return _timed(6, "monotone 3D energy growth", 2700.0, body)


def _tiny_instances():
    """Small stability pairs (N*M <= 64) from 1-D minimisers and from random traces."""
    nl = allen_cahn()
    rng = np.random.default_rng(7)
    out = []
    for a in (-0.5, 0.0, 0.5):
        for N, M in ((9, 6), (13, 4), (16, 4), (21, 3)):
            grid = build_grid(1, 4.0, N, M, None, a)
            start = ExtensionField.from_trace_profile(grid, lambda x: np.tanh(x / 2.0))
            v = minimize(grid, nl, start, start).field
            out.append(stability_form(v, nl, grid.L))
            rnd = ExtensionField(grid, rng.uniform(-1, 1, grid.shape))
            out.append(stability_form(rnd, nl, grid.L))
        grid = build_grid(2, 2.0, 5, 4, None, a)
        rnd = ExtensionField(grid, rng.uniform(-1, 1, grid.shape))
        out.append(stability_form(rnd, nl, grid.L))
    return out


def criterion_7():
    def body():
        nl, rep = layer_minimizer_2d()
        st = lambda_monotonicity(rep.field, nl, [4, 8, 16])
        gap = 0.0
        for form in _tiny_instances():
            gap = max(gap, abs(principal_eigenpair(form).lam - dense_principal_eigenvalue(form)))
        ok = bool(np.all(st.lam >= -1e-8)) and st.nonincreasing and bool(np.all(st.phi_min > 0)) and gap <= 1e-10
        lams = ", ".join(f"{x:.4e}" for x in st.lam)
        return ok, (f"lambda_R = {lams}, min phi {st.phi_min.min():.1e}, dense-oracle gap {gap:.1e}")
    return _timed(7, "stability structure", 300.0, body)


def oblique_solution(theta=np.pi / 6, L=32.0, N=257, M=12):
    """n = 2 monotone solve with data from the 1-D layer laid along omega = (cos theta, sin theta)."""
    nl = allen_cahn()
    h = 2 * L / (N - 1)
    L1 = np.ceil(L * np.sqrt(2.0) / h) * h
    prof = compute_layer(nl, 0.0, L1, int(round(2 * L1 / h)) + 1, M)
    grid = build_grid(2, L, N, M, None, 0.0)
    data = transplant(prof.field, grid, [np.cos(theta), np.sin(theta)])
    return nl, minimize(grid, nl, data, data)


def _radial_bump():
    grid = build_grid(2, 16.0, 129, 4, None, 0.0)
    return ExtensionField.from_trace_profile(grid, lambda x1, x2: np.exp(-(x1 ** 2 + x2 ** 2) / 16.0))


def criterion_8():
    def body():
        theta = np.pi / 6
        nl, rep = oblique_solution(theta)
        v = rep.field
        phi = lateral_gradient(v.values, v.grid)[1]
        q = liouville_quotient(v, phi, 0)
        ver = symmetry_verdict(v)
        counter = symmetry_verdict(_radial_bump())
        ok = (rep.converged and q.coefficient_of_variation <= 0.05 and ver.profile_residual <= 0.05
              and counter.verdict == NOT_ONE_DIM)
        return ok, (f"quotient CV {q.coefficient_of_variation:.2e} (mean {q.mean:.4f}, cot theta "
                    f"{1 / np.tan(theta):.4f}), profile residual {ver.profile_residual:.2e}, "
                    f"radial bump verdict {counter.verdict}")
    return _timed(8, "Liouville quotient / 1-D symmetry", 300.0, body)


def gradient_check(a, fields=20, seed=0):
    """Worst relative error of the energy gradient against central differences."""
    nl = allen_cahn()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(fields):
        n = 1 + k % 2
        grid = build_grid(n, 2.0, 5 if n == 1 else 4, 4, None, a, DIRICHLET if k % 3 else PERIODIC)
        v = ExtensionField(grid, rng.uniform(-1.5, 1.5, grid.shape))
        g = energy_gradient(v, nl).ravel()
        fd = np.empty_like(g)
        eps = 1e-5
        base = v.values.ravel()
        for i in range(base.size):
            plus, minus = base.copy(), base.copy()
            plus[i] += eps
            minus[i] -= eps
            fd[i] = (total_energy(ExtensionField(grid, plus.reshape(grid.shape)), nl)
                     - total_energy(ExtensionField(grid, minus.reshape(grid.shape)), nl)) / (2 * eps)
        worst = max(worst, float(np.linalg.norm(g - fd) / np.linalg.norm(g)))
    return worst


def criterion_9():
    def body():
        errs = {a: gradient_check(a) for a in (-0.5, 0.0, 0.5)}
        worst = max(errs.values())
        return worst <= 1e-6, f"max rel err {worst:.2e} over 60 random fields (limit 1e-06)"
    return _timed(9, "gradient correctness", 10.0, body)


def small_grids(limit=64):
    for n, max_n in ((1, limit), (2, 6)):
        for N in range(2, max_n + 1):
            for M in range(2, limit // N + 1):
                yield n, N, M


def assembly_gap(exponents=(0.3,)):
    worst, count = 0.0, 0
    for base in exponents:
        for a in (base, -base):
            for bc in (DIRICHLET, PERIODIC):
                for n, N, M in small_grids():
                    if bc == PERIODIC and N < 3:
                        continue
                    grid = build_grid(n, 1.0, N, M, None, a, bc)
                    worst = max(worst, float(np.max(np.abs(dense_operator(grid) - grid.operator().toarray()))))
                    count += 1
    return worst, count


def criterion_10():
    def body():
        worst, count = assembly_gap()
        return worst <= 1e-12, f"max |sparse - dense| {worst:.1e} on {count} grids (limit 1e-12)"
    return _timed(10, "assembly oracle", 10.0, body)


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10}
SLOW = {6}


def verify_all(full=False, only=None, echo=print):
    results = []
    for k, fn in CRITERIA.items():
        if only is not None and k not in only:
            continue
        if k in SLOW and not full:
            continue
        res = fn()
        echo(res.line())
        results.append(res)
    return results
