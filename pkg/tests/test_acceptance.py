"""Acceptance gate: every full-scale check the laboratory promises.

Each test prints exactly one verdict line (PASS/FAIL plus the measured
numbers) before asserting, so running this module with -s reads as a
checklist.  Tolerances are the advertised ones, not what the code happens
to achieve; runtime limits are asserted where the promise includes one.
"""

import math
import time

import numpy as np
import pytest

from taxislab.diagnostics import (
    build_dictionary,
    check_gradient_inequality,
    count_violations,
    dual_norm_proxy,
    fit_inequality_constant,
    random_pair,
    required_constant,
    tv_series,
    GradIneqConfig,
)
from taxislab.experiments import (
    BUMP_CENTERS_1D,
    bell_with_mass,
    bell_with_width,
    certified_movement_rate,
    two_bump_u,
)
from taxislab.fields import (
    ScalarField,
    integrate,
    laplacian,
    lp_norm,
    make_field,
    make_grid,
)
from taxislab.linear_mp import (
    MPProbeConfig,
    default_counterexample,
    probe_lower_bound,
    run_counterexample,
)
from taxislab.motility import linear, shifted
from taxislab.solver import SimParams, epsilon_sweep, simulate


def _verdict(ok: bool, name: str, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok


# --------------------------------------------------------------------------
# shared full-scale stabilization family: one signal shape at four masses


@pytest.fixture(scope="module")
def stabilization_family():
    grid = make_grid(1, [1.0], [128])
    u0 = two_bump_u(grid, 1.0, 2.0)
    base = bell_with_width(grid, 0.5, 0.1)
    dictionary = build_dictionary(
        grid, bumps=tuple(((c,), 0.03) for c in BUMP_CENTERS_1D))
    times = [40.0 * i / 9 for i in range(10)]
    runs = []
    for scale in (1.0, 0.5, 0.25, 0.125):
        v0 = ScalarField(grid, scale * base.values)
        traj = simulate(u0, v0, linear(), SimParams(t_end=40.0, diag_stride=200),
                        snapshot_times=tuple(times[1:]))
        tv = tv_series(traj, dictionary, times)
        diff = ScalarField(grid, traj.final.u.values - u0.values)
        runs.append({
            "mass": traj.records[0].l1_v,
            "traj": traj,
            "tv": tv,
            "proxy": dual_norm_proxy(diff, dictionary),
        })
    return {"u0": u0, "dictionary": dictionary, "runs": runs}


# --------------------------------------------------------------------------
# 1: conservation and comparison on a 2D run


def test_conservation_and_comparison_on_a_2d_run():
    start = time.monotonic()
    grid = make_grid(2, [1.0, 1.0], [64, 64])
    u0 = two_bump_u(grid, 1.0, 2.0)
    v0 = bell_with_width(grid, 1.0, 0.25)
    traj = simulate(u0, v0, linear(), SimParams(t_end=5.0, diag_stride=100))
    elapsed = time.monotonic() - start

    recs = traj.records
    m0 = recs[0].mass_u
    v_l1_0 = recs[0].l1_v
    v_max_0 = recs[0].max_v
    mass_drift = max(abs(r.mass_u - m0) for r in recs)
    min_u = min(r.min_u for r in recs)
    min_v = min(r.min_v for r in recs)
    max_v = max(r.max_v for r in recs)
    budget_drift = max(abs(r.l1_v + r.cumulative_uv - v_l1_0) for r in recs)

    ok = (
        mass_drift <= 1e-10 * m0
        and min_u >= -1e-14
        and min_v >= -1e-14
        and max_v <= v_max_0 + 1e-14
        and budget_drift <= 1e-10 * v_l1_0
        and elapsed < 60.0
    )
    assert _verdict(
        ok, "conservation_and_comparison_2d",
        f"64x64 to t=5 in {elapsed:.1f}s ({len(recs)} records): "
        f"mass drift {mass_drift:.2e} (tol {1e-10 * m0:.2e}), "
        f"min u {min_u:.1e}, min v {min_v:.1e}, "
        f"sup v {max_v:.6f} vs initial {v_max_0:.6f}, "
        f"signal budget drift {budget_drift:.2e} (tol {1e-10 * v_l1_0:.2e})",
    )


# --------------------------------------------------------------------------
# 2: operator correctness


def test_laplacian_adjointness_zero_sum_and_quadratic_exactness():
    rng = np.random.default_rng(0)
    worst_sym = 0.0
    worst_sum = 0.0
    for case in range(100):
        if case < 50:
            grid = make_grid(1, [1.0], [64])
            shape = (64,)
        else:
            grid = make_grid(2, [1.0, 0.5], [24, 20])
            shape = (24, 20)
        f = ScalarField(grid, rng.uniform(-1.0, 1.0, shape))
        g = ScalarField(grid, rng.uniform(-1.0, 1.0, shape))
        lf, lg = laplacian(f), laplacian(g)
        a = math.fsum((lf.values * g.values).ravel()) * grid.cellvol
        b = math.fsum((f.values * lg.values).ravel()) * grid.cellvol
        worst_sym = max(worst_sym, abs(a - b))
        worst_sum = max(worst_sum, abs(integrate(lf)))

    grid1 = make_grid(1, [1.0], [100])
    x = grid1.axis_centers(0)
    lap = laplacian(ScalarField(grid1, x * x))
    worst_quad = float(np.max(np.abs(lap.values[1:-1] - 2.0)))

    ok = worst_sym <= 1e-11 and worst_sum <= 1e-11 and worst_quad <= 1e-11
    assert _verdict(
        ok, "laplacian_operator_correctness",
        f"100 random fields: adjointness defect {worst_sym:.2e}, "
        f"zero-sum defect {worst_sum:.2e}, quadratic interior error "
        f"{worst_quad:.2e} (tol 1e-11 each)",
    )


# --------------------------------------------------------------------------
# 3: certified movement budget over a ten-point partition


def test_time_variation_certificate_on_a_ten_point_partition(stabilization_family):
    worst = max(run["tv"].max_violation for run in stabilization_family["runs"])
    ok = worst <= 1e-10
    assert _verdict(
        ok, "movement_budget_certificate",
        f"4 coupled runs x 10-point partition x "
        f"{len(stabilization_family['dictionary'].entries)} test functions: "
        f"max pairing excess over the certified bound {worst:.2e} (tol 1e-10)",
    )


# --------------------------------------------------------------------------
# 4: blow-down family sharpness


def test_blowdown_family_budgets_collapse_domination_residual():
    start = time.monotonic()
    spec = default_counterexample(cells=512)
    report = run_counterexample(spec, [1, 2, 3, 4, 5, 6])
    elapsed = time.monotonic() - start

    rows = report.rows
    budgets_ok = all(r.budget_integral <= report.L_declared for r in rows)
    mins = [r.min_V_at_x0 for r in rows]
    caps_ok = all(m <= 2.0 * r.gap ** spec.alpha for m, r in zip(mins, rows))
    decreasing = all(b < a for a, b in zip(mins, mins[1:]))
    domination = max(r.max_domination_ratio for r in rows)
    residual = min(r.min_supersolution_residual for r in rows)

    ok = (
        budgets_ok and caps_ok and decreasing
        and domination <= 1.0 + 1e-6
        and residual >= -1e-8
        and elapsed < 120.0
    )
    assert _verdict(
        ok, "blowdown_family_sharpness",
        f"512 cells, k=1..6 in {elapsed:.1f}s: budgets max "
        f"{max(r.budget_integral for r in rows):.2f} <= L {report.L_declared:.2f}, "
        f"center minima {mins[0]:.2e} down to {mins[-1]:.2e} "
        f"(each under twice gap^alpha, decreasing), "
        f"domination {domination:.6f} (tol 1+1e-6), residual {residual:.1e} "
        f"(tol -1e-8)",
    )


# --------------------------------------------------------------------------
# 5: positivity floor, abstract probe and coupled signal


def test_positivity_floor_probe_and_coupled_signal_floor():
    config = MPProbeConfig(
        grid=make_grid(1, [1.0], [128]),
        p1=4.0, q1=4.0, p2=2.0, q2=2.0,
        L=4.0, T=1.0, tau=0.1, seed=0,
    )
    result = probe_lower_bound(config, 32)
    probe_ok = result.empirical_C > 0.0 and all(
        inst.inf_window > 0.0 for inst in result.instances
    )

    grid = make_grid(1, [1.0], [128])
    u0 = two_bump_u(grid)
    v0 = bell_with_width(grid, 1.0, 0.2)  # compact support: honest zero region
    mins = []
    for eps in (1e-1, 1e-2, 1e-3):
        traj = simulate(u0, v0, linear(), SimParams(t_end=0.25, eps=eps))
        mins.append(float(np.min(traj.final.v.values)))
    coupled_ok = all(m > 0.0 for m in mins)
    spread = max(mins) / min(mins) if coupled_ok else math.inf

    ok = probe_ok and coupled_ok and spread < 2.0
    assert _verdict(
        ok, "positivity_floor",
        f"32 budgeted instances: inf over (0.1, 1] = {result.empirical_C:.4e} > 0; "
        f"coupled min_x v(0.25) over eps 1e-1..1e-3: "
        + ", ".join(f"{m:.4e}" for m in mins)
        + f"; spread {spread:.3f} (gate < 2)",
    )


# --------------------------------------------------------------------------
# 6: inequality constant, out-of-sample and trivial cases


def test_inequality_constant_out_of_sample_and_trivial_cases():
    grid = make_grid(1, [1.0], [128])
    etas = (0.25, 1.0, 4.0)
    c_fit = fit_inequality_constant(2.0, etas, 200, grid, seed=4)
    rng = np.random.default_rng(5)
    fresh = [random_pair(grid, rng) for _ in range(200)]
    bad = count_violations(fresh, 2.0, etas, 1.1 * c_fit)

    x = grid.axis_centers(0)
    psi = ScalarField(grid, np.exp(0.5 * np.cos(math.pi * x)))
    phi = ScalarField(grid, np.cos(math.pi * x) ** 2)
    cfg = GradIneqConfig(p=2.0, eta=1.0, c_value=0.0)
    lhs_zero_phi, _, ok_zero_phi = check_gradient_inequality(
        make_field(grid, 0.0), psi, cfg)
    lhs_flat_psi, _, ok_flat_psi = check_gradient_inequality(
        phi, make_field(grid, 2.0), cfg)
    trivial_ok = (
        lhs_zero_phi == 0.0 and ok_zero_phi
        and required_constant(make_field(grid, 0.0), psi, 2.0, 1.0) == 0.0
        and lhs_flat_psi == 0.0 and ok_flat_psi
        and required_constant(phi, make_field(grid, 2.0), 2.0, 1.0) == 0.0
    )

    ok = c_fit > 0.0 and bad == 0 and trivial_ok
    assert _verdict(
        ok, "gradient_inequality_constant",
        f"fitted C = {c_fit:.6f} on 200 pairs; {bad} violations among 200 "
        f"fresh pairs at 1.1C; trivial cases (zero density, flat weight) "
        f"exact: {trivial_ok}",
    )


# --------------------------------------------------------------------------
# 7: degeneracy decides pattern retention


def test_degenerate_motility_keeps_the_pattern_shifted_erases_it():
    start = time.monotonic()
    grid = make_grid(1, [1.0], [256])
    u0 = two_bump_u(grid, 1.0, 2.0)
    v0 = bell_with_mass(grid, peak=0.25, mass=0.01)
    params = SimParams(t_end=50.0, diag_stride=500)

    ratios = {}
    for name, spec in (("degenerate", linear()), ("shifted", shifted(0.5, linear()))):
        traj = simulate(u0, v0, spec, params)
        ratios[name] = (traj.records[-1].nonconstancy_u
                        / traj.records[0].nonconstancy_u)
    elapsed = time.monotonic() - start

    ok = ratios["degenerate"] >= 0.5 and ratios["shifted"] <= 0.1 and elapsed < 120.0
    assert _verdict(
        ok, "pattern_retention",
        f"256 cells to t=50 in {elapsed:.1f}s: nonconstancy ratio "
        f"{ratios['degenerate']:.3f} with degenerate motility (gate >= 0.5) vs "
        f"{ratios['shifted']:.3f} with the 0.5-shifted control (gate <= 0.1)",
    )


# --------------------------------------------------------------------------
# 8: net movement is linear in the signal mass


def test_net_movement_linear_in_signal_mass(stabilization_family):
    runs = stabilization_family["runs"]
    dictionary = stabilization_family["dictionary"]
    xi_hat = certified_movement_rate(runs[0]["traj"], dictionary)
    margins = []
    ok = True
    for run in runs:
        bound = xi_hat * run["mass"]
        ok = ok and run["proxy"] <= bound * (1.0 + 1e-12)
        margins.append(f"{run['proxy']:.3e} <= {bound:.3e}")
    assert _verdict(
        ok, "movement_linear_in_signal",
        f"rate {xi_hat:.4f} fitted at the largest mass; proxy vs bound at "
        f"masses 1, 1/2, 1/4, 1/8 of {runs[0]['mass']:.3g}: " + "; ".join(margins),
    )


# --------------------------------------------------------------------------
# 9: vanishing regularization is consistent


def test_regularization_distances_shrink_and_reach_the_limit():
    grid = make_grid(1, [1.0], [128])
    u0 = two_bump_u(grid, 1.0, 2.0)
    v0 = bell_with_width(grid, 1.0, 0.25)
    params = SimParams(t_end=2.0, diag_stride=100)
    report = epsilon_sweep(u0, v0, linear(), params, [0.1, 0.025, 0.00625])
    limit = simulate(u0, v0, linear(), params)
    gaps = report.u_l1_distances
    limit_gap = lp_norm(
        ScalarField(grid, report.final_u[-1].values - limit.final.u.values), 1.0)

    shrinking = all(b < a for a, b in zip(gaps, gaps[1:]))
    ok = shrinking and limit_gap <= 2.0 * gaps[-1]
    assert _verdict(
        ok, "regularization_consistency",
        f"successive L1 gaps at eps 0.1 -> 0.025 -> 0.00625: "
        + " > ".join(f"{g:.3e}" for g in gaps)
        + f"; distance to the degenerate run {limit_gap:.3e} "
        f"(gate 2x last gap = {2.0 * gaps[-1]:.3e})",
    )
