"""Runnable studies over the taxis-consumption solver.

Each experiment id maps to a driver that builds its data from a Config,
runs the solver or one of the auxiliary laboratories, writes CSV artifacts
plus a verdict.txt of PASS/FAIL lines, and returns the collected result.
The numeric thresholds quoted in the verdict lines are acceptance gates for
the artifacts, chosen once and kept fixed; they are not fitted per run.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import Config, ConfigError
from .diagnostics import (
    TVReport,
    build_dictionary,
    count_violations,
    dual_norm_proxy,
    fit_inequality_constant,
    plateau_height,
    random_pair,
    tv_series,
    write_diagnostics_csv,
    write_tv_csv,
)
from .fields import Grid, ScalarField, lp_norm, make_grid, write_snapshot
from .linear_mp import (
    CounterexampleSpec,
    MPProbeConfig,
    probe_lower_bound,
    run_counterexample,
    write_counterexample_csv,
)
from .motility import (
    MotilitySpec,
    envelope_constants,
    exp_decay,
    linear,
    saturating,
    shifted,
)
from .solver import SimParams, Trajectory, epsilon_sweep, simulate

__all__ = [
    "plateau_bump",
    "two_bump_u",
    "bell_with_width",
    "bell_with_mass",
    "certified_movement_rate",
    "ExperimentResult",
    "run_experiment",
    "ThresholdReport",
    "sweep_v0_mass",
    "worker_count",
]

# shared pattern-threshold geometry: witness bumps sit on the flat stretch
# and on the plateau of the two-bump u
BUMP_CENTERS_1D = (0.275, 0.675)
WITNESS_RADIUS = 0.03


def plateau_bump(grid: Grid, center: Sequence[float], radius: float) -> np.ndarray:
    """Radial bump: 1 inside `radius`, quintic decay to zero at twice that."""
    r2 = np.zeros(grid.cells)
    for axis in range(grid.dim):
        x = grid.axis_centers(axis)
        shape = [1] * grid.dim
        shape[axis] = -1
        r2 = r2 + (x.reshape(shape) - center[axis]) ** 2
    s = np.clip((np.sqrt(r2) - radius) / radius, 0.0, 1.0)
    return 1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def two_bump_u(grid: Grid, base: float = 1.0, height: float = 2.0) -> ScalarField:
    """Flat level plus one plateau bump; the staple nonconstant initial cell
    density.  In 1d the plateau sits on [0.6125, 0.7375] inside a support of
    [0.55, 0.8]; in 2d the bump is centered off the diagonal."""
    if grid.dim == 1:
        vals = base + height * plateau_bump(grid, (0.675,), 0.0625 * grid.lengths[0])
    else:
        center = (0.35 * grid.lengths[0], 0.55 * grid.lengths[1])
        vals = base + height * plateau_bump(grid, center, 0.12 * min(grid.lengths))
    return ScalarField(grid, vals)


def bell_with_width(grid: Grid, peak: float, radius: float,
                    center: Sequence[float] | None = None) -> ScalarField:
    if center is None:
        center = tuple(x / 2.0 for x in grid.lengths)
    return ScalarField(grid, peak * plateau_bump(grid, center, radius))


def bell_with_mass(grid: Grid, peak: float, mass: float,
                   center: Sequence[float] | None = None) -> ScalarField:
    """Centered bump of fixed peak whose width is bisected until the discrete
    integral hits `mass`.

    Keeping the peak fixed while only the width varies means a mass sweep
    does not change the signal range the motility sees."""
    if peak <= 0 or mass <= 0:
        raise ValueError("need positive peak and mass")
    if center is None:
        center = tuple(x / 2.0 for x in grid.lengths)
    vol = grid.cellvol

    def mass_at(radius: float) -> float:
        return peak * float(np.sum(plateau_bump(grid, center, radius))) * vol

    r_hi = min(grid.lengths) / 4.0
    r_lo = grid.h_min / 4.0
    if mass > mass_at(r_hi):
        raise ValueError(
            f"mass {mass} is out of reach: peak {peak} caps the centered bump "
            f"at {mass_at(r_hi)}"
        )
    if mass < mass_at(r_lo):
        raise ValueError(
            f"mass {mass} sits below the single-cell floor {mass_at(r_lo)} "
            f"for peak {peak} on this grid"
        )
    for _ in range(200):
        r_mid = 0.5 * (r_lo + r_hi)
        if r_mid in (r_lo, r_hi):
            break
        if mass_at(r_mid) < mass:
            r_lo = r_mid
        else:
            r_hi = r_mid
    radius = 0.5 * (r_lo + r_hi)
    if 2.0 * radius < 4.0 * grid.h_min:
        warnings.warn(
            f"bell of mass {mass} spans under four cells; the profile is "
            "barely resolved",
            RuntimeWarning,
            stacklevel=2,
        )
    return bell_with_width(grid, peak, radius, center)


# --------------------------------------------------------------------------
# driver plumbing


@dataclass
class ExperimentResult:
    experiment: str
    passed: bool
    lines: list[str]
    artifacts: dict[str, Path]


def _check(lines: list[str], ok: bool, name: str, detail: str) -> bool:
    lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok


def _grid_from(config: Config) -> Grid:
    g = config["grid"]
    dim = g["dim"]
    return make_grid(dim, [g["length"]] * dim, [g["cells"]] * dim)


def _motility_from(config: Config) -> tuple[MotilitySpec, MotilitySpec]:
    """(degenerate spec, shifted control); the control reuses the same base."""
    m = config["motility"]
    base = {"linear": linear, "saturating": saturating}.get(m["kind"])
    spec = base() if base is not None else exp_decay(m["beta"])
    control = shifted(m["shift"], spec) if m["shift"] > 0 else spec
    return spec, control


def _params_from(config: Config, **overrides) -> SimParams:
    r = config["run"]
    kw = dict(t_end=r["t_end"], eps=r.get("eps", 0.0),
              cfl_safety=r["cfl_safety"], diag_stride=r["diag_stride"])
    kw.update(overrides)
    return SimParams(**kw)


def worker_count() -> int:
    """Sweep parallelism, from TAXISLAB_THREADS (default 1)."""
    raw = os.environ.get("TAXISLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"TAXISLAB_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ValueError("TAXISLAB_THREADS must be at least 1")
    return n


def _write_verdict(lines: Sequence[str], path: Path) -> None:
    path.write_text("\n".join(lines) + "\n")


def run_experiment(config: Config, out_dir: str | Path,
                   seed: int | None = None) -> ExperimentResult:
    """Dispatch one experiment, writing its artifacts under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    drivers: dict[str, Callable[[Config, Path, int | None], tuple[list[str], dict[str, Path]]]] = {
        "E1_boundedness": _run_boundedness,
        "E2_stabilization": _run_stabilization,
        "E3_pattern_threshold": _run_pattern_threshold,
        "E4_eps_convergence": _run_eps_convergence,
        "E5a_mp_probe": _run_mp_probe,
        "E5b_counterexample": _run_counterexample_family,
        "E6_inequality_fit": _run_inequality_fit,
    }
    driver = drivers.get(config.experiment)
    if driver is None:
        raise ConfigError(f"no driver for experiment {config.experiment!r}")
    lines, artifacts = driver(config, out, seed)
    verdict = out / "verdict.txt"
    _write_verdict(lines, verdict)
    artifacts["verdict"] = verdict
    passed = all(line.startswith("PASS") for line in lines)
    return ExperimentResult(config.experiment, passed, lines, artifacts)


# --------------------------------------------------------------------------
# E1: a-priori bounds on the coupled run


def _record_near(traj: Trajectory, t: float):
    return min(traj.records, key=lambda r: abs(r.t - t))


def _run_boundedness(config: Config, out: Path,
                     seed: int | None) -> tuple[list[str], dict[str, Path]]:
    grid = _grid_from(config)
    init = config["init"]
    u0 = two_bump_u(grid, init["u_base"], init["u_height"])
    v0 = bell_with_width(grid, init["v_peak"], init["v_width"])
    spec, _ = _motility_from(config)
    params = _params_from(config)
    traj = simulate(u0, v0, spec, params)

    lines: list[str] = []
    recs = traj.records
    m0 = recs[0].mass_u
    v_l1_0 = recs[0].l1_v
    v_max_0 = recs[0].max_v
    u_max_0 = recs[0].max_u

    mass_drift = max(abs(r.mass_u - m0) for r in recs)
    _check(lines, mass_drift <= 1e-10 * m0, "mass_conservation",
           f"max |mass - m0| = {mass_drift:.3e} (tolerance 1e-10 * m0 = {1e-10 * m0:.3e})")
    min_u = min(r.min_u for r in recs)
    _check(lines, min_u >= -1e-12 * max(1.0, u_max_0), "u_nonnegative",
           f"min u over run = {min_u:.3e}")
    min_v = min(r.min_v for r in recs)
    _check(lines, min_v >= -1e-13 * max(1.0, v_max_0), "v_nonnegative",
           f"min v over run = {min_v:.3e}")
    vmax_ok = all(b.max_v <= a.max_v + 1e-12 * v_max_0
                  for a, b in zip(recs, recs[1:]))
    _check(lines, vmax_ok and recs[-1].max_v <= v_max_0, "v_max_monotone",
           f"sup v fell {v_max_0:.6g} -> {recs[-1].max_v:.6g}")
    vl1_ok = all(b.l1_v <= a.l1_v + 1e-12 * v_l1_0 for a, b in zip(recs, recs[1:]))
    _check(lines, vl1_ok, "v_mass_monotone",
           f"int v fell {v_l1_0:.6g} -> {recs[-1].l1_v:.6g}")
    budget_drift = max(abs(r.l1_v + r.cumulative_uv - v_l1_0) for r in recs)
    _check(lines, budget_drift <= 1e-10 * v_l1_0, "consumption_budget",
           f"max |int v + int int uv - int v0| = {budget_drift:.3e} "
           f"(tolerance 1e-10 * int v0 = {1e-10 * v_l1_0:.3e})")
    u_max_run = max(r.max_u for r in recs)
    _check(lines, u_max_run <= 5.0 * u_max_0 and not traj.blowup, "u_bounded",
           f"sup u over run = {u_max_run:.6g} (gate: 5 * initial = {5 * u_max_0:.6g})")

    t_tail = 0.9 * params.t_end
    tail = _record_near(traj, t_tail)
    cum_total = recs[-1].cumulative_uv
    tail_growth = (cum_total - tail.cumulative_uv) / cum_total if cum_total > 0 else 0.0
    _check(lines, tail_growth <= 0.05, "consumption_settles",
           f"final 10% of the run adds {100 * tail_growth:.2f}% of the uv integral "
           "(gate 5%)")
    l4_scale = max(r.l4_u for r in recs)
    l4_shift = abs(recs[-1].l4_u - tail.l4_u) / l4_scale
    _check(lines, l4_shift <= 0.05, "l4_settles",
           f"|L4(T) - L4(0.9T)| = {100 * l4_shift:.2f}% of the running max (gate 5%)")
    grad_peak = max(r.sup_gradv for r in recs)
    grad_ratio = recs[-1].sup_gradv / grad_peak if grad_peak > 0 else 0.0
    _check(lines, grad_ratio <= 0.05, "gradv_decays",
           f"final sup |grad v| is {100 * grad_ratio:.2f}% of its peak (gate 5%)")

    artifacts = {}
    diag = out / "diagnostics.csv"
    write_diagnostics_csv(recs, diag)
    artifacts["diagnostics"] = diag
    for name, f in (("u_final", traj.final.u), ("v_final", traj.final.v)):
        p = out / f"{name}.snap"
        write_snapshot(f, traj.final.t, p)
        artifacts[name] = p
    return lines, artifacts


# --------------------------------------------------------------------------
# E2: stabilization and the linear-in-signal-mass movement bound


def _tv_partition(t_end: float, pieces: int = 8) -> list[float]:
    return [t_end * i / pieces for i in range(pieces + 1)]


def _witness_dictionary(grid: Grid, radius: float):
    return build_dictionary(
        grid, bumps=tuple(((c * grid.lengths[0],), radius) for c in BUMP_CENTERS_1D))


def certified_movement_rate(traj: Trajectory, dictionary) -> float:
    """Movement constant per unit of initial signal mass, evaluated on one run.

    The summation-by-parts certificate bounds any dual pairing of u(t) - u(0)
    by max ||lap psi||_inf * (eps * mass_u0 * t + Lam(K) * consumed signal),
    and the consumed signal never exceeds the initial signal mass; dividing
    by that mass is the empirical stand-in for the non-constructive movement
    constant."""
    spec = traj.spec
    if not spec.degenerate:
        raise ValueError("the movement certificate needs a degenerate motility")
    first = traj.records[0]
    K = first.max_v
    lam_hi = envelope_constants(spec, K)[1] if K > 0 else 0.0
    maxlap = max(e.lap_inf for e in dictionary.entries)
    budget = (traj.params.eps * first.mass_u * traj.final.t
              + lam_hi * traj.final.cumulative_uv)
    if first.l1_v <= 0:
        raise ValueError("movement rate is undefined without initial signal")
    return maxlap * budget / first.l1_v


def _stabilization_run(config: Config, scale: float) -> tuple[Trajectory, TVReport, float]:
    grid = _grid_from(config)
    init = config["init"]
    u0 = two_bump_u(grid, init["u_base"], init["u_height"])
    base = bell_with_width(grid, init["v_peak"], init["v_radius"])
    v0 = ScalarField(grid, scale * base.values)
    spec, _ = _motility_from(config)
    params = _params_from(config)
    times = _tv_partition(params.t_end)
    traj = simulate(u0, v0, spec, params, snapshot_times=tuple(times[1:]))
    dictionary = _witness_dictionary(grid, config["scaling"]["bump_radius"])
    tv = tv_series(traj, dictionary, times)
    diff = ScalarField(grid, traj.final.u.values - u0.values)
    return traj, tv, dual_norm_proxy(diff, dictionary)


def _run_stabilization(config: Config, out: Path,
                       seed: int | None) -> tuple[list[str], dict[str, Path]]:
    factors = [0.5**j for j in range(config["scaling"]["levels"])]
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        futures = [pool.submit(_stabilization_run, config, s) for s in factors]
        runs = [f.result() for f in futures]

    lines: list[str] = []
    artifacts: dict[str, Path] = {}
    masses = [traj.records[0].l1_v for traj, _, _ in runs]
    proxies = [proxy for _, _, proxy in runs]
    grid = _grid_from(config)
    radius = config["scaling"]["bump_radius"]
    dictionary = _witness_dictionary(grid, radius)
    xi_hat = certified_movement_rate(runs[0][0], dictionary)

    worst_cert = max(tv.max_violation for _, tv, _ in runs)
    _check(lines, worst_cert <= 1e-10, "tv_certificate",
           f"max pairing excess over the certified bound = {worst_cert:.3e} "
           "(tolerance 1e-10)")
    scale_ok = True
    margins = []
    for mass, proxy in zip(masses, proxies):
        bound = xi_hat * mass
        margins.append(f"{proxy:.4e} <= {bound:.4e}")
        scale_ok = scale_ok and proxy <= bound * (1.0 + 1e-12)
    _check(lines, scale_ok, "movement_linear_shape",
           "net movement under the one-rate linear bound at every mass: "
           + "; ".join(margins))

    base_traj = runs[0][0]
    v_final = base_traj.records[-1].l1_v
    _check(lines, v_final <= 1e-8 * masses[0], "signal_exhausted",
           f"final int v = {v_final:.3e} (gate 1e-8 of initial {masses[0]:.3e})")
    tv0 = runs[0][1]
    last = tv0.interval_proxy[-1]
    _check(lines, last <= 0.01 * max(tv0.total_variation, 1e-300), "movement_stalls",
           f"last-interval movement {last:.3e} vs total {tv0.total_variation:.3e} "
           "(gate 1%)")

    c3 = plateau_height(grid, radius)
    delta_hat = c3 * 1.0 * (2.0 * radius) / (2.0 * xi_hat)
    _check(lines, delta_hat > 0 and math.isfinite(delta_hat), "threshold_estimate",
           f"predicted safe signal mass delta_hat = {delta_hat:.4e} "
           f"(witness plateau {c3:.6f}, movement rate {xi_hat:.4f})")

    rows = ["scale,mass,net_proxy,linear_bound,raw_slope"]
    for s, mass, proxy in zip(factors, masses, proxies):
        rows.append(f"{s!r},{mass!r},{proxy!r},{(xi_hat * mass)!r},{(proxy / mass)!r}")
    rows.append(f"# xi_hat = {xi_hat!r}")
    rows.append(f"# delta_hat = {delta_hat!r}")
    scaling_csv = out / "scaling_report.csv"
    scaling_csv.write_text("\n".join(rows) + "\n")
    artifacts["scaling"] = scaling_csv
    diag = out / "diagnostics.csv"
    write_diagnostics_csv(base_traj.records, diag)
    artifacts["diagnostics"] = diag
    tv_csv = out / "tv_report.csv"
    write_tv_csv(tv0, tv_csv)
    artifacts["tv"] = tv_csv
    return lines, artifacts


# --------------------------------------------------------------------------
# E3: degeneracy keeps the pattern, a uniformly elliptic shift erases it


def _pattern_run(config: Config, use_shift: bool) -> Trajectory:
    grid = _grid_from(config)
    init = config["init"]
    u0 = two_bump_u(grid, init["u_base"], init["u_height"])
    v0 = bell_with_mass(grid, init["v_peak"], init["v_mass"])
    degenerate, control = _motility_from(config)
    spec = control if use_shift else degenerate
    return simulate(u0, v0, spec, _params_from(config))


def _run_pattern_threshold(config: Config, out: Path,
                           seed: int | None) -> tuple[list[str], dict[str, Path]]:
    if config["motility"]["shift"] <= 0:
        raise ConfigError("pattern threshold needs motility.shift > 0 for the control")
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        fut_deg = pool.submit(_pattern_run, config, False)
        fut_shift = pool.submit(_pattern_run, config, True)
        traj_deg = fut_deg.result()
        traj_shift = fut_shift.result()

    lines: list[str] = []
    artifacts: dict[str, Path] = {}
    gates = config["verdict"]
    ratios = {}
    for name, traj in (("degenerate", traj_deg), ("shifted", traj_shift)):
        nc0 = traj.records[0].nonconstancy_u
        ncT = traj.records[-1].nonconstancy_u
        ratios[name] = ncT / nc0
        diag = out / f"diagnostics_{name}.csv"
        write_diagnostics_csv(traj.records, diag)
        artifacts[f"diagnostics_{name}"] = diag
        snap = out / f"u_final_{name}.snap"
        write_snapshot(traj.final.u, traj.final.t, snap)
        artifacts[f"u_final_{name}"] = snap
    _check(lines, ratios["degenerate"] >= gates["degenerate_ratio"],
           "pattern_survives_degenerate",
           f"nonconstancy ratio {ratios['degenerate']:.4f} "
           f"(gate >= {gates['degenerate_ratio']})")
    _check(lines, ratios["shifted"] <= gates["shifted_ratio"],
           "pattern_erased_by_shift",
           f"nonconstancy ratio {ratios['shifted']:.4f} "
           f"(gate <= {gates['shifted_ratio']})")

    report = out / "pattern_report.csv"
    rows = ["case,initial_nonconstancy,final_nonconstancy,ratio"]
    for name, traj in (("degenerate", traj_deg), ("shifted", traj_shift)):
        rows.append(
            f"{name},{traj.records[0].nonconstancy_u!r},"
            f"{traj.records[-1].nonconstancy_u!r},{ratios[name]!r}"
        )
    report.write_text("\n".join(rows) + "\n")
    artifacts["report"] = report
    return lines, artifacts


# --------------------------------------------------------------------------
# E4: vanishing-regularization convergence


def _run_eps_convergence(config: Config, out: Path,
                         seed: int | None) -> tuple[list[str], dict[str, Path]]:
    grid = _grid_from(config)
    init = config["init"]
    u0 = two_bump_u(grid, init["u_base"], init["u_height"])
    v0 = bell_with_width(grid, init["v_peak"], init["v_width"])
    spec, _ = _motility_from(config)
    sw = config["sweep"]
    eps_list = [sw["eps_start"] * sw["eps_factor"] ** j for j in range(sw["eps_count"])]
    r = config["run"]
    params = SimParams(t_end=r["t_end"], eps=0.0, cfl_safety=r["cfl_safety"],
                       diag_stride=r["diag_stride"])
    report = epsilon_sweep(u0, v0, spec, params, eps_list)
    limit = simulate(u0, v0, spec, params)
    du_limit = lp_norm(
        ScalarField(grid, report.final_u[-1].values - limit.final.u.values), 1.0)
    dv_limit = lp_norm(
        ScalarField(grid, report.final_v[-1].values - limit.final.v.values), math.inf)

    lines: list[str] = []
    du = report.u_l1_distances
    dv = report.v_linf_distances
    du_ok = all(b < a for a, b in zip(du, du[1:]))
    _check(lines, du_ok, "u_distances_shrink",
           "successive L1 gaps " + " > ".join(f"{d:.3e}" for d in du))
    dv_ok = all(b < a for a, b in zip(dv, dv[1:]))
    _check(lines, dv_ok, "v_distances_shrink",
           "successive sup gaps " + " > ".join(f"{d:.3e}" for d in dv))
    _check(lines, du_limit <= 2.0 * du[-1], "limit_consistent",
           f"distance from the smallest regularization to the degenerate run "
           f"= {du_limit:.3e} (gate 2x the last gap {du[-1]:.3e})")

    rows = ["eps_hi,eps_lo,u_l1_distance,v_linf_distance"]
    for (hi, lo, d1, d2) in zip(eps_list, eps_list[1:], du, dv):
        rows.append(f"{hi!r},{lo!r},{d1!r},{d2!r}")
    rows.append(f"{eps_list[-1]!r},0.0,{du_limit!r},{dv_limit!r}")
    csv = out / "eps_report.csv"
    csv.write_text("\n".join(rows) + "\n")
    return lines, {"report": csv}


# --------------------------------------------------------------------------
# E5a: positivity probe plus the coupled signal floor


def _run_mp_probe(config: Config, out: Path,
                  seed: int | None) -> tuple[list[str], dict[str, Path]]:
    grid = _grid_from(config)
    pr = config["probe"]
    probe_cfg = MPProbeConfig(
        grid=grid, p1=pr["p1"], q1=pr["q1"], p2=pr["p2"], q2=pr["q2"],
        L=pr["L"], T=pr["T"], tau=pr["tau"],
        seed=pr["seed"] if seed is None else seed,
    )
    result = probe_lower_bound(probe_cfg, pr["instances"])

    lines: list[str] = []
    _check(lines, result.empirical_C > 0.0, "positivity_floor",
           f"inf over {pr['instances']} budgeted instances on "
           f"({pr['tau']}, {pr['T']}] = {result.empirical_C:.6e}")
    budgets_ok = all(
        i.budget_a <= pr["L"] * (1 + 1e-9) and i.budget_b <= pr["L"] * (1 + 1e-9)
        for i in result.instances
    )
    _check(lines, budgets_ok, "budgets_respected",
           f"all coefficient budgets within L = {pr['L']}")

    rows = ["instance,budget_a,budget_b,sup_V0,mass_V0,inf_window"]
    for idx, inst in enumerate(result.instances):
        rows.append(
            f"{idx},{inst.budget_a!r},{inst.budget_b!r},{inst.sup_V0!r},"
            f"{inst.mass_V0!r},{inst.inf_window!r}"
        )
    probe_csv = out / "probe_report.csv"
    probe_csv.write_text("\n".join(rows) + "\n")
    artifacts = {"probe": probe_csv}

    cp = config["coupled"]
    if cp["enabled"]:
        cgrid = make_grid(1, [1.0], [cp["cells"]])
        u0 = two_bump_u(cgrid)
        v0 = bell_with_width(cgrid, 1.0, 0.2)
        eps_list = [cp["eps_start"] * cp["eps_factor"] ** j
                    for j in range(cp["eps_count"])]
        t_check = cp["t_check"]
        mins = []
        for eps in eps_list:
            traj = simulate(u0, v0, linear(),
                            SimParams(t_end=t_check, eps=eps))
            mins.append(float(np.min(traj.final.v.values)))
        all_pos = all(m > 0 for m in mins)
        _check(lines, all_pos, "signal_positive_inside",
               f"min_x v at t = {t_check} over eps {eps_list}: "
               + ", ".join(f"{m:.4e}" for m in mins))
        spread = max(mins) / min(mins) if all_pos else math.inf
        _check(lines, spread < 2.0, "signal_floor_stable",
               f"floor spread across regularizations = {spread:.4f} (gate < 2)")
        rows = ["eps,min_v_at_t_check"]
        for eps, m in zip(eps_list, mins):
            rows.append(f"{eps!r},{m!r}")
        coupled_csv = out / "coupled_report.csv"
        coupled_csv.write_text("\n".join(rows) + "\n")
        artifacts["coupled"] = coupled_csv
    return lines, artifacts


# --------------------------------------------------------------------------
# E5b: the budget-bounded blow-down family


def _run_counterexample_family(config: Config, out: Path,
                               seed: int | None) -> tuple[list[str], dict[str, Path]]:
    grid = _grid_from(config)
    fam = config["family"]
    spec = CounterexampleSpec(
        grid=grid, alpha=fam["alpha"], T=fam["T"], R=fam["R"], R0=fam["R0"],
        p=fam["p"], q=fam["q"],
    )
    ks = list(range(fam["k_min"], fam["k_max"] + 1))
    run_cfg = config["run"]
    report = run_counterexample(spec, ks, cfl_safety=run_cfg["cfl_safety"],
                                check_stride=run_cfg["check_stride"])

    lines: list[str] = []
    budgets = [r.budget_integral for r in report.rows]
    _check(lines, all(b <= report.L_declared for b in budgets), "budgets_uniform",
           f"potential budgets max {max(budgets):.4f} <= declared L "
           f"{report.L_declared:.4f} for every family member")
    mins = [r.min_V_at_x0 for r in report.rows]
    caps = [2.0 * r.gap**spec.alpha for r in report.rows]
    under = all(m <= c for m, c in zip(mins, caps))
    dec = all(b < a for a, b in zip(mins, mins[1:]))
    _check(lines, under and dec, "center_value_collapses",
           "min V at the center " + " > ".join(f"{m:.4e}" for m in mins)
           + "; each under twice the barrier floor")
    dom = max(r.max_domination_ratio for r in report.rows)
    _check(lines, dom <= 1.0 + 1e-6, "barrier_dominates",
           f"max V / barrier on the core ball = {dom:.9f} (tolerance 1 + 1e-6)")
    res = min(r.min_supersolution_residual for r in report.rows)
    _check(lines, res >= -1e-8, "barrier_is_supersolution",
           f"min analytic residual = {res:.3e} (tolerance -1e-8)")

    csv = out / "counterexample_report.csv"
    write_counterexample_csv(report, csv)
    return lines, {"report": csv}


# --------------------------------------------------------------------------
# E6: the weighted gradient inequality constant


def _run_inequality_fit(config: Config, out: Path,
                        seed: int | None) -> tuple[list[str], dict[str, Path]]:
    grid = _grid_from(config)
    fit = config["fit"]
    eta_grid = (0.25, 1.0, 4.0)
    base_seed = fit["seed"] if seed is None else seed
    c_fit = fit_inequality_constant(fit["p"], eta_grid, fit["corpus"], grid,
                                    base_seed, modes=fit["modes"])
    rng = np.random.default_rng(base_seed + 1)
    fresh = [random_pair(grid, rng, fit["modes"]) for _ in range(fit["validation"])]
    c_test = fit["headroom"] * c_fit
    bad = count_violations(fresh, fit["p"], eta_grid, c_test)

    lines: list[str] = []
    _check(lines, c_fit > 0, "constant_fitted",
           f"empirical constant {c_fit:.6f} over {fit['corpus']} pairs x "
           f"{len(eta_grid)} eta values")
    _check(lines, bad == 0, "holds_out_of_sample",
           f"{bad} violations among {fit['validation']} fresh pairs at "
           f"{fit['headroom']} x the fitted constant")

    csv = out / "inequality_report.csv"
    csv.write_text(
        "p,corpus,validation,eta_grid,c_fit,headroom,violations\n"
        f"{fit['p']!r},{fit['corpus']},{fit['validation']},"
        f"{'|'.join(map(str, eta_grid))},{c_fit!r},{fit['headroom']!r},{bad}\n"
    )
    return lines, {"report": csv}


# --------------------------------------------------------------------------
# signal-mass threshold sweep


@dataclass(frozen=True)
class ThresholdReport:
    deltas: tuple[float, ...]
    ratios: tuple[float, ...]
    proxies: tuple[float, ...]
    threshold: float | None
    xi_hat: float
    delta_hat: float
    monotone_ok: bool


def _sweep_single(config: Config, delta: float) -> tuple[float, float, Trajectory]:
    grid = _grid_from(config)
    init = config["init"]
    u0 = two_bump_u(grid, init["u_base"], init["u_height"])
    v0 = bell_with_mass(grid, init["v_peak"], delta)
    degenerate, _ = _motility_from(config)
    traj = simulate(u0, v0, degenerate, _params_from(config))
    dictionary = _witness_dictionary(grid, WITNESS_RADIUS)
    diff = ScalarField(grid, traj.final.u.values - u0.values)
    ratio = traj.records[-1].nonconstancy_u / traj.records[0].nonconstancy_u
    return ratio, dual_norm_proxy(diff, dictionary), traj


def sweep_v0_mass(config: Config, delta_list: Sequence[float],
                  out_dir: str | Path | None = None) -> ThresholdReport:
    """Scan decreasing initial signal masses for the largest one whose
    pattern survives.

    Per mass the width-rescaled fixed-peak bell keeps the signal envelope
    constant while only the mass varies; runs go through a thread pool sized
    by TAXISLAB_THREADS.  The prediction delta_hat pits the movement rate
    certified on the largest-mass run against the witness-bump pairing gap,
    and should come out at or below the observed threshold.
    """
    if config.experiment != "E3_pattern_threshold":
        raise ConfigError("the mass sweep drives the E3_pattern_threshold setup")
    deltas = [float(d) for d in delta_list]
    if not deltas or any(d <= 0 for d in deltas):
        raise ValueError("delta_list must hold positive masses")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("delta_list must be strictly decreasing")
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        futures = [pool.submit(_sweep_single, config, d) for d in deltas]
        results = [f.result() for f in futures]
    ratios = [r for r, _, _ in results]
    proxies = [p for _, p, _ in results]

    grid = _grid_from(config)
    dictionary = _witness_dictionary(grid, WITNESS_RADIUS)
    xi_hat = certified_movement_rate(results[0][2], dictionary)
    c3 = plateau_height(grid, WITNESS_RADIUS)
    delta_hat = c3 * 1.0 * (2.0 * WITNESS_RADIUS) / (2.0 * xi_hat)

    threshold = None
    for d, r in zip(deltas, ratios):
        if r >= 0.5:
            threshold = d if threshold is None else max(threshold, d)
    # movement should shrink along the decreasing-mass list
    inversions = sum(
        1 for a, b in zip(proxies, proxies[1:]) if b > a * (1.0 + 1e-9)
    )
    monotone_ok = inversions <= 1

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = ["delta,ratio,net_movement_proxy"]
        for d, r, p in zip(deltas, ratios, proxies):
            rows.append(f"{d!r},{r!r},{p!r}")
        rows.append(f"# threshold = {threshold!r}")
        rows.append(f"# xi_hat = {xi_hat!r}")
        rows.append(f"# delta_hat = {delta_hat!r}")
        (out / "threshold_report.csv").write_text("\n".join(rows) + "\n")

    return ThresholdReport(
        deltas=tuple(deltas), ratios=tuple(ratios), proxies=tuple(proxies),
        threshold=threshold, xi_hat=xi_hat, delta_hat=delta_hat,
        monotone_ok=monotone_ok,
    )
