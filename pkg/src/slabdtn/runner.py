"""Scenario pipelines: stages exchange data only through files in the output directory."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .energy import minimality_audit, nested_energies
from .fastsolve import SeparableSolver
from .grid import (PERIODIC, ExtensionField, apply_neumann_flux, build_grid, dual_flux,
                   duality_residual)
from .layer import (LayerProfile, compute_layer, double_well_audit, hamiltonian_identity,
                    limit_profile_potential_audit, trace_increasing, transplant)
from .nonlinearity import Nonlinearity, allen_cahn, polynomial, zero
from .scenario import Scenario
from .snapshot import read_snapshot, write_snapshot
from .solver import limit_profiles, minimize, newton_solve
from .stability import lambda_monotonicity, liouville_quotient, monotone_implies_stable_check
from .solver import lateral_gradient
from .symbol import build_symbol_table
from .symmetry import CONSTANT, ONE_DIM, symmetry_verdict, trace_monotonicity

log = logging.getLogger(__name__)

SOLUTION = "solution.slab"
LAYER = "layer.slab"


class StageFailure(RuntimeError):
    pass


@dataclass
class StageResult:
    name: str
    passed: bool
    message: str = ""
    metrics: dict = field(default_factory=dict)
    wall_time: float = 0.0


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(c) for c in row])


def write_summary(path, pairs):
    write_rows(path, ["key", "value"], pairs.items())


# ---------------------------------------------------------------- setup


def make_nonlinearity(sc: Scenario) -> Nonlinearity:
    kind = sc.get("nonlinearity", "kind")
    tau = sc.get("nonlinearity", "tau")
    if kind == "allen_cahn":
        nl = allen_cahn(1.0 if tau is None else tau)
    elif kind == "polynomial":
        nl = polynomial(sc.get("nonlinearity", "coefficients"))
        if tau is not None:
            nl = replace(nl, tau=float(tau), c_u=float(nl.G(tau)))
    else:
        nl = zero()
        if tau is not None:
            nl = nl.with_tau(tau)
    if sc.get("nonlinearity", "flip_sign"):
        f, fp = nl.f, nl.fprime
        nl = replace(nl, f=lambda u: -f(u), fprime=lambda u: -fp(u), name=nl.name + "[f sign flipped]")
    return nl


def make_grid(sc: Scenario):
    g = sc.get
    return build_grid(g("grid", "n"), g("grid", "L"), g("grid", "N"), g("grid", "M"),
                      g("grid", "gamma_mesh"), g("grid", "a"), g("grid", "lateral_bc"))


def _direction(sc: Scenario, n):
    d = sc.get("boundary", "direction")
    if not d:
        d = np.eye(n)[-1]
    d = np.asarray(d, dtype=float)
    return d / np.linalg.norm(d)


def make_boundary(sc: Scenario, grid, nl) -> ExtensionField:
    kind = sc.get("boundary", "kind")
    omega = _direction(sc, grid.n)
    s = sum(w * X for w, X in zip(omega, grid.coords()))
    if kind == "constant":
        val = sc.get("boundary", "value")
        u = np.full(grid.lateral_shape, nl.tau if val is None else val)
    elif kind == "layer":
        u = np.tanh(s / sc.get("boundary", "width"))
    elif kind == "profile":
        return _profile_boundary(grid, nl, omega, sc.get("grid", "gamma_mesh"))
    elif kind == "linear":
        u = s
    else:
        u = np.cos(np.pi * s / grid.L)
    return ExtensionField(grid, np.broadcast_to(u, grid.shape).copy())


def _profile_boundary(grid, nl, omega, gamma_mesh):
    """The 1-D layer of the same exponent and vertical mesh, laid along omega."""
    if grid.n == 1:
        return compute_layer(nl, grid.a, grid.L, grid.N, grid.M, gamma_mesh).field
    L1 = np.ceil(grid.L * np.sqrt(grid.n) / grid.h) * grid.h
    prof = compute_layer(nl, grid.a, L1, int(round(2 * L1 / grid.h)) + 1, grid.M, gamma_mesh)
    return transplant(prof.field, grid, omega)


def make_init(sc: Scenario, boundary: ExtensionField) -> ExtensionField:
    noise = sc.get("boundary", "noise")
    vals = boundary.values.copy()
    if noise > 0:
        rng = np.random.default_rng(sc.seed)
        pert = noise * rng.standard_normal(vals.shape)
        mask = np.broadcast_to(boundary.grid.interior_mask(), vals.shape)
        vals[mask] += pert[mask]
    return ExtensionField(boundary.grid, vals)


def _need(out, name):
    path = os.path.join(out, name)
    if not os.path.exists(path):
        raise StageFailure(f"missing artifact {name}; run the producing stage first")
    return read_snapshot(path)


# ---------------------------------------------------------------- stages


def stage_symbol(sc, out, nl):
    g = sc.get
    M = g("symbol", "M")
    table = build_symbol_table(g("grid", "a"), g("symbol", "rho_min"), g("symbol", "rho_max"),
                               g("symbol", "count"), None if M is None else int(M), g("grid", "gamma_mesh"))
    table.write_csv(os.path.join(out, "symbol.csv"))
    sig = table.sigma
    increasing = bool(np.all(np.diff(sig) > 0))
    zero_ok = table.rho[0] > 0 or sig[0] == 0.0
    metrics = {"free_slope": table.free_slope, "free_slope_stderr": table.free_slope_stderr,
               "expected_slope": 1.0 - table.a, "asymptotic_constant": table.asymptotic_constant,
               "fit_residual": table.fit_residual, "M": table.M}
    return increasing and zero_ok, "" if increasing else "symbol not strictly increasing", metrics


def stage_solve(sc, out, nl):
    grid = make_grid(sc)
    bd = make_boundary(sc, grid, nl)
    init = make_init(sc, bd)
    method = sc.get("solve", "method")
    tol = sc.get("solve", "tol")
    kind = {"layer": "tanh", "profile": "layer"}.get(sc.get("boundary", "kind"), sc.get("boundary", "kind"))
    if method == "newton":
        rep = newton_solve(grid, nl, bd, init, tol, init_kind=kind)
    else:
        rep = minimize(grid, nl, bd, init, tol, sc.get("solve", "max_iter"), init_kind=kind)
        if method == "descent+newton" and rep.converged:
            pol = newton_solve(grid, nl, bd, rep.field, tol, init_kind=kind)
            if pol.converged:
                rep = replace(pol, energy_trace=rep.energy_trace + pol.energy_trace[1:],
                              iterations=rep.iterations + pol.iterations, method="descent+newton")
    write_snapshot(os.path.join(out, SOLUTION), rep.field)
    trace_ok = rep.method == "newton" or bool(np.all(np.diff(rep.energy_trace) <= 1e-12 * max(1.0, abs(rep.energy_trace[0]))))
    write_summary(os.path.join(out, "solve.csv"), {
        "method": rep.method, "converged": rep.converged, "iterations": rep.iterations,
        "residual_norm": rep.residual_norm, "energy": rep.energy_trace[-1], "init": rep.init_kind,
        "message": rep.message, "energy_trace_nonincreasing": trace_ok})
    write_rows(os.path.join(out, "energy_trace.csv"), ["iteration", "energy"], enumerate(rep.energy_trace))
    return rep.converged and trace_ok, rep.message, {"iterations": rep.iterations, "residual_norm": rep.residual_norm}


def _radii_for(grid, radii):
    return [R for R in radii if R <= grid.L]


def stage_energy(sc, out, nl):
    v = _need(out, SOLUTION)
    radii = _radii_for(v.grid, sc.get("audit", "radii"))
    rep = nested_energies(v, nl, radii)
    rep.write_csv(os.path.join(out, "energy.csv"))
    rows = []
    holds = True
    for R in radii:
        if R >= 2 and R + 1 <= v.grid.L:
            rec = minimality_audit(v, nl, R)
            holds &= rec.holds
            rows.append((R, rec.energy_v, rec.energy_w, rec.holds, rec.shell_energy,
                         rec.shell_energy / R ** (v.grid.n - 1)))
    write_rows(os.path.join(out, "competitor.csv"),
               ["R", "energy_v", "energy_w", "holds", "shell_energy", "shell_over_R_n_minus_1"], rows)
    ok = rep.nondecreasing() and holds
    msg = []
    if not rep.nondecreasing():
        msg.append("total energy decreases in R")
    if not holds:
        msg.append("competitor has lower energy")
    expected = sc.get("checks", "exponent")
    if expected is not None:
        within = not rep.degenerate and abs(rep.fitted_exponent - expected) <= sc.get("checks", "exponent_tol")
        ok &= within
        if not within:
            msg.append(f"exponent {rep.fitted_exponent:.4f} outside {expected} +- {sc.get('checks', 'exponent_tol')}")
    return ok, "; ".join(msg), {"exponent": rep.fitted_exponent, "exponent_stderr": rep.exponent_stderr}


def stage_stability(sc, out, nl):
    v = _need(out, SOLUTION)
    radii = [R for R in _radii_for(v.grid, sc.get("audit", "radii")) if R < v.grid.L or not v.grid.periodic]
    rep = lambda_monotonicity(v, nl, radii, sc.get("audit", "eig_tol"))
    rep.write_csv(os.path.join(out, "stability.csv"))
    floor = sc.get("checks", "lambda_floor")
    ok = rep.nonincreasing and bool(np.all(rep.lam >= floor)) and bool(np.all(rep.phi_min > 0))
    return ok, "" if ok else "lambda/positivity check failed", {
        "lambda_min": float(rep.lam.min()), "phi_min": float(rep.phi_min.min())}


def stage_liouville(sc, out, nl):
    v = _need(out, SOLUTION)
    grid = v.grid
    axis = sc.get("audit", "axis") % grid.n
    rec = monotone_implies_stable_check(v, nl, axis)
    if rec.status == "degenerate":
        write_summary(os.path.join(out, "liouville.csv"), {"status": "degenerate"})
        return True, "constant field: quotient degenerate", {}
    phi = lateral_gradient(v.values, grid)[axis]
    rows = {"status": rec.status, "phi_min": rec.phi_min, "linearized_residual": rec.linearized_residual}
    ok = rec.status == "ok"
    cvs = []
    for i in range(grid.n):
        if i == axis:
            continue
        q = liouville_quotient(v, phi, i, collar=sc.get("audit", "collar"))
        q.write_csv(os.path.join(out, f"liouville_{i + 1}.csv"))
        rows[f"cv_{i + 1}"] = q.coefficient_of_variation
        rows[f"mean_{i + 1}"] = q.mean
        cvs.append(q.coefficient_of_variation)
    write_summary(os.path.join(out, "liouville.csv"), rows)
    cv = max(cvs) if cvs else 0.0
    ok &= cv <= sc.get("checks", "cv_max")
    return ok, "" if ok else f"quotient CV {cv:.4f}", {"cv": cv}


def stage_symmetry(sc, out, nl):
    v = _need(out, SOLUTION)
    if v.grid.n < 2:
        raise StageFailure("symmetry audit needs n >= 2")
    ver = symmetry_verdict(v, sc.get("checks", "cv_max"), sc.get("checks", "residual_max"),
                           sc.get("audit", "collar"))
    ver.write_csv(os.path.join(out, "symmetry.csv"))
    ver.fit.write_csv(os.path.join(out, "profile.csv"))
    mono = trace_monotonicity(ver.fit)
    ok = ver.verdict in (ONE_DIM, CONSTANT) and mono != "mixed"
    return ok, f"verdict {ver.verdict}, trace {mono}", {
        "direction_cv": ver.direction_cv, "profile_residual": ver.profile_residual}


def stage_layer(sc, out, nl):
    g = sc.get
    prof = compute_layer(nl, g("grid", "a"), g("grid", "L"), g("grid", "N"), g("grid", "M"), g("grid", "gamma_mesh"))
    write_snapshot(os.path.join(out, LAYER), prof.field)
    ham = hamiltonian_identity(prof, nl)
    ham.write_csv(os.path.join(out, "layer.csv"), prof.trace)
    center = float(np.interp(0.0, prof.grid.x, prof.trace))
    return prof.trace_monotone, "", {"u_center": center, "limits_low": prof.limits[0], "limits_high": prof.limits[1]}


def _profile_from(field) -> LayerProfile:
    u = field.trace
    return LayerProfile(field, trace_increasing(u), (float(u[0]), float(u[-1])), float("nan"))


def stage_hamiltonian(sc, out, nl):
    v = _need(out, LAYER)
    prof = _profile_from(v)
    grid = v.grid
    rows = []
    ham = hamiltonian_identity(prof, nl)
    rows.append((grid.N, grid.M, grid.h, ham.residual, ham.far_field))
    N, M = grid.N, grid.M
    for _ in range(sc.get("audit", "refinements")):
        N, M = 2 * N - 1, 2 * M
        fine = compute_layer(nl, grid.a, grid.L, N, M, grid.gamma_mesh)
        h2 = hamiltonian_identity(fine, nl)
        rows.append((N, M, fine.grid.h, h2.residual, h2.far_field))
    write_rows(os.path.join(out, "hamiltonian.csv"), ["N", "M", "h", "residual", "far_field"], rows)
    res = np.array([r[3] for r in rows])
    ratios = res[:-1] / res[1:]
    wells_equal = float(nl.G(1.0)) == float(nl.G(-1.0))
    far = max(r[4] for r in rows)
    ok = bool(np.all(ratios >= sc.get("checks", "ratio_min"))) and far <= sc.get("checks", "far_field") and wells_equal
    return ok, "" if ok else "hamiltonian identity check failed", {
        "ratio_min": float(ratios.min()), "far_field": far, "wells_equal": wells_equal}


def stage_double_well(sc, out, nl):
    v = _need(out, LAYER)
    rec = double_well_audit(nl, _profile_from(v))
    write_summary(os.path.join(out, "double_well.csv"), {
        "limit_low": rec.limits[0], "limit_high": rec.limits[1],
        "g_prime_low": rec.g_prime_at_limits[0], "g_prime_high": rec.g_prime_at_limits[1],
        "g_min_gap": rec.g_min_gap, "phi_min": rec.phi_min, "wells_ok": rec.wells_ok,
        "interior_ok": rec.interior_ok, "phi_ok": rec.phi_ok, "potential_consistent": rec.consistent})
    return rec.passed, "" if rec.passed else "double-well audit failed", {"phi_min": rec.phi_min}


def stage_limits(sc, out, nl):
    v = _need(out, SOLUTION)
    if v.grid.n < 2:
        raise StageFailure("limit profiles need n >= 2")
    vbar, vunder, _ = limit_profiles(v, nl, axis=sc.get("audit", "axis"))
    write_snapshot(os.path.join(out, "vbar.slab"), vbar)
    write_snapshot(os.path.join(out, "vunder.slab"), vunder)
    rec = limit_profile_potential_audit(vbar, vunder, nl, cv_tol=sc.get("checks", "cv_max"))
    write_summary(os.path.join(out, "limits.csv"), {
        "m": rec.m, "m_tilde": rec.m_tilde, "M_tilde": rec.M_tilde, "M": rec.M,
        "wells_ok": rec.wells_ok, "ordering_ok": rec.ordering_ok,
        "lower_kind": rec.lower_kind, "upper_kind": rec.upper_kind})
    return rec.passed, "", {"m": rec.m, "M": rec.M}


def duality_study(a, N0=16, M0=8, refinements=2, L=1.0):
    """Duality residual of the Neumann solve with data cos(pi x / L) under simultaneous refinement."""
    rows = []
    N, M = N0, M0
    for _ in range(refinements + 1):
        grid = build_grid(1, L, N, M, None, a, PERIODIC)
        load = apply_neumann_flux(grid, np.cos(np.pi * grid.x / L))
        v = ExtensionField(grid, SeparableSolver(grid).solve(load))
        w = dual_flux(v)
        rows.append((N, M, duality_residual(w), float(np.max(np.abs(w.top)))))
        N, M = 2 * N, 2 * M
    return rows


def stage_duality(sc, out, nl):
    rows = duality_study(sc.get("grid", "a"), refinements=sc.get("audit", "refinements"))
    write_rows(os.path.join(out, "duality.csv"), ["N", "M", "residual", "top_flux"], rows)
    res = np.array([r[2] for r in rows])
    ratios = res[:-1] / res[1:]
    top = max(r[3] for r in rows)
    ok = bool(np.all(ratios >= sc.get("checks", "ratio_min"))) and top <= 1e-10
    return ok, "", {"ratio_min": float(ratios.min()), "top_flux": top}


STAGE_FUNCS = {
    "symbol": stage_symbol, "solve": stage_solve, "energy": stage_energy, "stability": stage_stability,
    "liouville": stage_liouville, "symmetry": stage_symmetry, "layer": stage_layer,
    "hamiltonian": stage_hamiltonian, "double_well": stage_double_well, "limits": stage_limits,
    "duality": stage_duality,
}


# ---------------------------------------------------------------- run


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run(sc: Scenario, out_dir, pipeline=None) -> tuple[int, list]:
    """Run the scenario's stages in order; returns (exit status, stage results)."""
    os.makedirs(out_dir, exist_ok=True)
    failed_marker = os.path.join(out_dir, "FAILED")
    if os.path.exists(failed_marker):
        os.remove(failed_marker)
    nl = make_nonlinearity(sc)
    results = []
    for name in (pipeline or sc.pipeline):
        t0 = time.perf_counter()
        try:
            ok, msg, metrics = STAGE_FUNCS[name](sc, out_dir, nl)
        except Exception as exc:  # a stage failure is data for the report
            log.debug("stage %s raised", name, exc_info=True)
            ok, msg, metrics = False, f"{type(exc).__name__}: {exc}", {}
        results.append(StageResult(name, bool(ok), msg, metrics, time.perf_counter() - t0))
    status = 0 if all(r.passed for r in results) else 1
    if status:
        with open(failed_marker, "w") as fh:
            for r in results:
                if not r.passed:
                    fh.write(f"{r.name}: {r.message}\n")
    files = {}
    for fname in sorted(os.listdir(out_dir)):
        if fname != "manifest.json" and os.path.isfile(os.path.join(out_dir, fname)):
            files[fname] = _sha256(os.path.join(out_dir, fname))
    manifest = {
        "scenario": sc.name, "scenario_text": sc.text, "seed": sc.seed, "version": __version__,
        "stages": [{"name": r.name, "passed": r.passed, "message": r.message,
                    "wall_time_s": r.wall_time, "metrics": {k: _fmt(v) for k, v in r.metrics.items()}}
                   for r in results],
        "files": files,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return status, results


def _run_one(args):
    sc, out_dir, pipeline = args
    status, results = run(sc, out_dir, pipeline)
    return sc.name, status, results


def run_many(scenarios, out_root, parallel=1, pipeline=None):
    """Each scenario writes to its own out_root/<name>; returns [(name, status, results)]."""
    jobs = [(sc, os.path.join(out_root, sc.name), pipeline) for sc in scenarios]
    names = [sc.name for sc in scenarios]
    if len(set(names)) != len(names):
        raise ValueError("scenario names must be unique within one run")
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            return list(ex.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]
