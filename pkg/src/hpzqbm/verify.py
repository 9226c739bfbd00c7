"""Self-checks of a run against the brute-force oracle, reported as JSON-ready dicts."""

from __future__ import annotations

import math

import numpy as np

from .bath import Discrete, tabulate_kernels
from .coefficients import trajectory, uniform_grid
from .dynamics import evolve
from .elementary import elementary
from .errors import ConfigurationError, ExtractionError, SingularBoundaryError
from .oracle import (
    FullPhaseSpaceModel,
    energy,
    extract_coefficients,
    propagate_full,
    purity_invariant,
    recurrence_time,
    reduced_series,
    thermal_state,
)

INVARIANT_TOL = 1e-9
SYMPLECTIC_TOL = 1e-10
UNCERTAINTY_TOL = 1e-8
BOUNDARY_TOL = 1e-10


def scaled_error(a, ref, floor=0.0):
    """max |a - ref| / max(max |ref|, floor); the plain difference when both scales vanish."""
    a, ref = np.asarray(a, dtype=float), np.asarray(ref, dtype=float)
    scale = max(float(np.max(np.abs(ref))) if ref.size else 0.0, floor)
    diff = float(np.max(np.abs(a - ref))) if ref.size else 0.0
    return diff / scale if scale > 0 else diff


def coefficient_floors(sys, hbar):
    """Tiny absolute scales per coefficient, so an all-zero reference (no coupling)
    is compared against rounding level instead of dividing 0 by 0."""
    om2 = max(sys.Omega**2, 1.0)
    return {"A": 1e-9 * sys.M * om2, "B": 1e-9 * math.sqrt(om2), "C": 1e-9 * hbar, "D": 1e-9 * hbar * sys.M * om2}


def moment_errors(series, reference):
    """Column-wise scaled errors between two moment series on the same times.

    sigma_qp is scaled by sqrt(max sigma_qq * max sigma_pp), the natural size
    of a covariance, since it may pass through zero.
    """
    a, r = series.values, reference.values
    out = {
        "mean_q": scaled_error(a[:, 0], r[:, 0]),
        "mean_p": scaled_error(a[:, 1], r[:, 1]),
        "sigma_qq": scaled_error(a[:, 2], r[:, 2]),
        "sigma_pp": scaled_error(a[:, 3], r[:, 3]),
    }
    cross = math.sqrt(float(np.max(np.abs(r[:, 2]))) * float(np.max(np.abs(r[:, 3]))))
    diff = float(np.max(np.abs(a[:, 4] - r[:, 4])))
    out["sigma_qp"] = diff / cross if cross > 0 else diff
    return out


def _check(name, passed, tolerance, measured, **detail):
    return {"name": name, "passed": bool(passed), "tolerance": tolerance, "measured": measured, **detail}


def check_times(t_lo, t_hi, n, dt):
    """n grid-aligned interior times spread over (t_lo, t_hi)."""
    raw = np.linspace(t_lo, t_hi, n + 2)[1:-1]
    return sorted({round(float(x) / dt) * dt for x in raw if round(float(x) / dt) > 0})


def run_verify(cfg, threads=1):
    """Compare the pipeline with the exact oracle for a discrete-bath run configuration."""
    if not isinstance(cfg.bath.spectral, Discrete):
        raise ConfigurationError("verify needs a discrete bath (the oracle simulates every mode)")
    if cfg.mode != "exact":
        raise ConfigurationError("verify checks the exact pipeline; set mode to 'exact'")
    sys, bath, g, tol = cfg.system, cfg.bath, cfg.grids, cfg.tolerances
    checks = []
    t_rec = recurrence_time(bath.spectral)
    model = FullPhaseSpaceModel(sys, bath)

    kernels = tabulate_kernels(bath, g.ds, max(g.t_max, g.ds))
    traj = trajectory(sys, bath, "exact", uniform_grid(g.t_max, g.dt), g.ds, kernels=kernels,
                      threads=threads, tol=tol.solver_tol, singular_tol=tol.singular_tol)
    singular = traj.singular_times()

    row0 = traj.row(0)
    checks.append(_check("zero_at_t0", row0 is not None and row0.as_tuple() == (0.0, 0.0, 0.0, 0.0), 0.0,
                         None if row0 is None else max(map(abs, row0.as_tuple()))))

    # coefficient equivalence at interior times below the recurrence bound
    t_hi = min(g.t_max, 0.95 * t_rec) if math.isfinite(t_rec) else g.t_max
    times = check_times(0.0, t_hi, tol.check_times, g.dt)
    worst, rows, skipped = 0.0, [], []
    pairs = []
    for t in times:
        i = int(round(t / g.dt))
        ours = traj.row(i)
        if ours is None:
            skipped.append(t)
            continue
        try:
            ref = extract_coefficients(model, bath, sys, t, derivative="exact")
        except ExtractionError:
            skipped.append(t)
            continue
        pairs.append((ours.as_tuple(), ref.as_tuple()))
        rows.append({"t": t, "pipeline": list(ours.as_tuple()), "oracle": list(ref.as_tuple())})
    if pairs:
        a = np.array([p[0] for p in pairs])
        r = np.array([p[1] for p in pairs])
        floors = coefficient_floors(sys, bath.hbar)
        per = {k: scaled_error(a[:, j], r[:, j], floors[k]) for j, k in enumerate("ABCD")}
        worst = max(per.values())
    else:
        per = {}
    checks.append(_check("oracle_coefficients", worst <= tol.rtol_coefficients, tol.rtol_coefficients, worst,
                         per_coefficient=per, times=rows, skipped_times=skipped, recurrence_time=t_rec))

    # moment equivalence, horizon stops before the recurrence time and the first singular row
    horizon = g.t_max
    if math.isfinite(t_rec):
        horizon = min(horizon, 0.95 * t_rec)
    if singular:
        horizon = min(horizon, singular[0] - g.dt)
    horizon = math.floor(horizon / g.dt_out + 1e-9) * g.dt_out
    for k, st in enumerate(cfg.initial_states):
        if horizon <= 0:
            checks.append(_check(f"oracle_moments[{k}]", True, tol.rtol_moments, 0.0, horizon=horizon, note="empty horizon"))
            continue
        ours = evolve(st, traj, sys, g.dt_out, t_end=horizon)
        ref = reduced_series(model, st, ours.t)
        errs = moment_errors(ours, ref)
        second = max(errs["sigma_qq"], errs["sigma_pp"], errs["sigma_qp"])
        checks.append(_check(f"oracle_moments[{k}]", second <= tol.rtol_moments and max(errs["mean_q"], errs["mean_p"]) <= tol.rtol_moments,
                             tol.rtol_moments, max(errs.values()), per_moment=errs, horizon=horizon))
        bound = bath.hbar**2 / 4.0
        if st.uncertainty_product >= bound:
            low = float(np.min(ours.column("uncertainty_product")))
            checks.append(_check(f"uncertainty[{k}]", low >= bound - UNCERTAINTY_TOL, UNCERTAINTY_TOL, bound - low))

    # oracle invariants
    st0 = thermal_state(model, cfg.initial_states[0] if cfg.initial_states else None)
    e0, p0 = energy(model, st0), purity_invariant(st0)
    sym, de, dp = 0.0, 0.0, 0.0
    for t in check_times(0.0, max(g.t_max, g.dt), tol.check_times, g.dt):
        sym = max(sym, model.symplectic_defect(model.propagator(t)))
        s = propagate_full(model, st0, t)
        de = max(de, abs(energy(model, s) - e0) / max(abs(e0), 1e-300))
        if p0 != 0.0:
            dp = max(dp, abs(purity_invariant(s) - p0) / abs(p0))
    checks.append(_check("symplecticity", sym <= SYMPLECTIC_TOL, SYMPLECTIC_TOL, sym))
    checks.append(_check("energy_conservation", de <= INVARIANT_TOL, INVARIANT_TOL, de))
    checks.append(_check("purity_conservation", dp <= INVARIANT_TOL, INVARIANT_TOL, dp))

    # elementary functions: boundary values and equation residual
    elem = []
    for t in cfg.elementary_times:
        if t <= 0:
            continue
        try:
            sol = elementary(sys, kernels, t, g.ds, tol=tol.solver_tol, singular_tol=tol.singular_tol)
        except SingularBoundaryError as exc:
            elem.append({"t": t, "singular_boundary": str(exc)})
            continue
        elem.append({"t": t, "boundary_defect": sol.boundary_defect(), "residual": sol.residual})
    ok = all("singular_boundary" in e or (e["boundary_defect"] <= BOUNDARY_TOL and e["residual"] <= 10 * tol.solver_tol) for e in elem)
    checks.append(_check("elementary", ok, {"boundary": BOUNDARY_TOL, "residual": 10 * tol.solver_tol}, elem))

    return {
        "passed": all(c["passed"] for c in checks),
        "singular_times": singular,
        "recurrence_time": t_rec,
        "checks": checks,
    }
