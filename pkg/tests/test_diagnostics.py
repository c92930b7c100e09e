"""Diagnostics: record fields, the certified dual-norm proxy, the
total-variation certificate, and the gradient-inequality fit.

The dual-norm oracle is analytic: pairing cos(pi x) against its own
normalized dictionary entry gives 1/(2 pi^2) by the half-angle identity,
and the midpoint grid sums cos^2 exactly, so the tolerance is rounding-level.
"""

import math

import numpy as np
import pytest

from taxislab.diagnostics import (
    DIAGNOSTICS_COLUMNS,
    GradIneqConfig,
    build_dictionary,
    check_gradient_inequality,
    count_violations,
    diagnostics_step,
    dual_norm_proxy,
    fit_inequality_constant,
    fit_over_pairs,
    nonconstancy,
    plateau_height,
    random_pair,
    read_diagnostics_csv,
    required_constant,
    tv_series,
    write_diagnostics_csv,
    write_tv_csv,
)
from taxislab.fields import ScalarField, grad_cell_sq, make_field, make_grid
from taxislab.motility import linear, shifted
from taxislab.solver import SimParams, initial_state, simulate


def _sample_state(n=32):
    grid = make_grid(1, [1.0], [n])
    x = grid.axis_centers(0)
    u = ScalarField(grid, 1.5 + np.cos(2.0 * math.pi * x) ** 2)
    v = ScalarField(grid, np.exp(-((x - 0.4) / 0.15) ** 2))
    return grid, initial_state(u, v)


# --------------------------------------------------------------------------
# records


def test_diagnostics_step_matches_independent_reductions():
    grid, state = _sample_state()
    vol = grid.cellvol
    u = state.u.values
    v = state.v.values
    rec = diagnostics_step(state, dt=0.123)
    assert rec.t == 0.0 and rec.dt == 0.123
    assert rec.mass_u == pytest.approx(float(np.sum(u)) * vol, rel=1e-13)
    assert rec.min_u == float(np.min(u)) and rec.max_u == float(np.max(u))
    assert rec.l1_v == pytest.approx(float(np.sum(np.abs(v))) * vol, rel=1e-13)
    assert rec.max_v == float(np.max(v)) and rec.min_v == float(np.min(v))
    assert rec.cumulative_uv == 0.0
    assert rec.cumulative_u2v == 0.0
    assert rec.cumulative_gradv4 == 0.0
    for p, got in ((2.0, rec.l2_u), (4.0, rec.l4_u), (8.0, rec.l8_u)):
        want = (float(np.sum(np.abs(u) ** p)) * vol) ** (1.0 / p)
        assert got == pytest.approx(want, rel=1e-12)
    assert rec.sup_gradv == pytest.approx(
        math.sqrt(float(np.max(grad_cell_sq(state.v)))), rel=1e-15
    )
    mean = float(np.sum(u)) * vol / grid.volume
    want_nc = float(np.sum(np.abs(u - mean))) * vol / grid.volume
    assert rec.nonconstancy_u == pytest.approx(want_nc, rel=1e-12)


def test_diagnostics_step_passes_through_the_cumulative_integrals():
    grid, state = _sample_state()
    traj = simulate(state.u, state.v, linear(), SimParams(t_end=0.01))
    rec = diagnostics_step(traj.final)
    assert rec.cumulative_uv == traj.final.cumulative_uv
    assert rec.cumulative_uv > 0.0


def test_nonconstancy_vanishes_only_for_flat_fields(grid1d):
    assert nonconstancy(make_field(grid1d, 3.7)) == 0.0
    x = grid1d.axis_centers(0)
    assert nonconstancy(ScalarField(grid1d, np.cos(math.pi * x))) > 0.0


def test_diagnostics_csv_round_trip_is_bit_exact(tmp_path):
    grid, state = _sample_state(16)
    recs = [diagnostics_step(state, dt=1e-300), diagnostics_step(state, dt=-1.5e300)]
    path = tmp_path / "diag.csv"
    write_diagnostics_csv(recs, path)
    back = read_diagnostics_csv(path)
    assert len(back) == 2
    for orig, copy in zip(recs, back):
        for col in DIAGNOSTICS_COLUMNS:
            assert getattr(copy, col) == getattr(orig, col)


def test_diagnostics_csv_rejects_a_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,mass\n0.0,1.0\n")
    with pytest.raises(ValueError, match="unexpected diagnostics header"):
        read_diagnostics_csv(path)


# --------------------------------------------------------------------------
# dictionary and dual-norm proxy


def test_dictionary_composition_1d():
    grid = make_grid(1, [1.0], [64])
    d = build_dictionary(grid)
    assert len(d.entries) == 9  # const + 8 cosine modes
    assert d.entries[0].name == "const"
    assert np.all(d.entries[0].field.values == 1.0)
    assert d.entries[0].lap_inf == 0.0
    assert all(e.certificate == 1.0 for e in d.entries)
    # mode m is normalized by max(1, k, k^2) with k = m pi
    x = grid.axis_centers(0)
    k = math.pi
    np.testing.assert_allclose(
        d.entries[1].field.values, np.cos(k * x) / k**2, rtol=1e-15
    )


def test_dictionary_composition_2d():
    grid = make_grid(2, [1.0, 0.5], [16, 12])
    d = build_dictionary(grid, n_modes=5)
    assert len(d.entries) == 6
    names = [e.name for e in d.entries]
    assert names[0] == "const"
    assert all(n.startswith("cos") for n in names[1:])


def test_bump_entry_has_the_certified_plateau():
    grid = make_grid(1, [1.0], [64])
    radius = 0.03
    d = build_dictionary(grid, n_modes=2, bumps=[((0.5,), radius)])
    bump = d.entries[-1]
    assert bump.name == "bump1"
    c3 = plateau_height(grid, radius)
    assert c3 == pytest.approx(0.00015588457268119892, rel=1e-15)
    assert float(np.max(bump.field.values)) == c3
    x = grid.axis_centers(0)
    inside = np.abs(x - 0.5) <= radius
    beyond = np.abs(x - 0.5) >= 2.0 * radius
    assert np.all(bump.field.values[inside] == c3)
    assert np.all(bump.field.values[beyond] == 0.0)


def test_dual_norm_proxy_cosine_oracle():
    grid = make_grid(1, [1.0], [64])
    d = build_dictionary(grid)
    x = grid.axis_centers(0)
    f = ScalarField(grid, np.cos(math.pi * x))
    # int cos^2(pi x) / pi^2 over [0, 1] = 1 / (2 pi^2)
    assert dual_norm_proxy(f, d) == pytest.approx(0.05066059182116889, rel=1e-13)


def test_dual_norm_proxy_dominates_every_pairing(rng):
    grid = make_grid(1, [1.0], [32])
    d = build_dictionary(grid, bumps=[((0.3,), 0.05)])
    f = ScalarField(grid, rng.standard_normal(32))
    proxy = dual_norm_proxy(f, d)
    vol = grid.cellvol
    for e in d.entries:
        assert proxy >= abs(float(np.sum(f.values * e.field.values)) * vol) - 1e-15
    with pytest.raises(ValueError, match="grids differ"):
        dual_norm_proxy(ScalarField(make_grid(1, [1.0], [16]), np.zeros(16)), d)


# --------------------------------------------------------------------------
# total-variation certificate


@pytest.fixture(scope="module")
def short_coupled_run():
    grid = make_grid(1, [1.0], [32])
    x = grid.axis_centers(0)
    u0 = ScalarField(grid, 1.0 + np.cos(2.0 * math.pi * x) ** 2)
    v0 = ScalarField(grid, 0.5 + 0.3 * np.cos(math.pi * x))
    return simulate(u0, v0, linear(), SimParams(t_end=0.03),
                    snapshot_times=(0.01, 0.02))


def test_tv_certificate_holds_on_a_short_run(short_coupled_run):
    d = build_dictionary(short_coupled_run.grid)
    report = tv_series(short_coupled_run, d, [0.0, 0.01, 0.02, 0.03])
    assert report.max_violation <= 1e-10
    assert len(report.interval_proxy) == 3
    assert report.total_variation == pytest.approx(
        math.fsum(report.interval_proxy), rel=1e-15
    )
    assert report.total_bound == pytest.approx(
        math.fsum(report.interval_bound), rel=1e-15
    )
    assert all(p >= 0 for p in report.interval_proxy)
    assert all(b >= 0 for b in report.interval_bound)


def test_tv_series_input_validation(short_coupled_run):
    d = build_dictionary(short_coupled_run.grid)
    with pytest.raises(ValueError, match="strictly increasing"):
        tv_series(short_coupled_run, d, [0.0, 0.0, 0.01])
    with pytest.raises(ValueError, match="strictly increasing"):
        tv_series(short_coupled_run, d, [0.02])
    with pytest.raises(ValueError, match="no snapshot recorded"):
        tv_series(short_coupled_run, d, [0.0, 0.015])


def test_tv_series_needs_a_degenerate_motility():
    grid = make_grid(1, [1.0], [16])
    x = grid.axis_centers(0)
    u0 = ScalarField(grid, 1.0 + 0.2 * np.cos(2.0 * math.pi * x))
    v0 = make_field(grid, 0.5)
    traj = simulate(u0, v0, shifted(0.5, linear()), SimParams(t_end=0.01))
    d = build_dictionary(grid)
    with pytest.raises(ValueError, match="degenerate motility"):
        tv_series(traj, d, [0.0, 0.01])


def test_tv_csv_layout(tmp_path, short_coupled_run):
    d = build_dictionary(short_coupled_run.grid)
    report = tv_series(short_coupled_run, d, [0.0, 0.01, 0.03])
    path = tmp_path / "tv.csv"
    write_tv_csv(report, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t_lo,t_hi,proxy,certified_bound"
    assert len(lines) == 2 + len(report.interval_proxy)
    assert lines[-1].startswith("total,,")
    cells = lines[1].split(",")
    assert float(cells[0]) == 0.0 and float(cells[1]) == 0.01
    assert float(cells[2]) == report.interval_proxy[0]


# --------------------------------------------------------------------------
# weighted gradient interpolation inequality


@pytest.mark.parametrize(
    "kwargs, match",
    [
        (dict(p=1.5, eta=1.0, c_value=1.0), "needs p >= 2"),
        (dict(p=2.0, eta=0.0, c_value=1.0), "needs eta > 0"),
        (dict(p=2.0, eta=1.0, c_value=-0.1), "must be nonnegative"),
    ],
)
def test_gradient_inequality_config_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        GradIneqConfig(**kwargs)


def test_gradient_inequality_rejects_bad_fields(grid1d):
    cfg = GradIneqConfig(p=2.0, eta=1.0, c_value=1.0)
    good_psi = make_field(grid1d, 1.0)
    with pytest.raises(ValueError, match="psi must be strictly positive"):
        check_gradient_inequality(make_field(grid1d, 1.0), make_field(grid1d, 0.0), cfg)
    with pytest.raises(ValueError, match="phi must be nonnegative"):
        check_gradient_inequality(make_field(grid1d, -1.0), good_psi, cfg)


def test_trivial_cases_are_exact(grid1d):
    """phi = 0 or flat psi zero the left side; no constant is needed."""
    x = grid1d.axis_centers(0)
    psi = ScalarField(grid1d, np.exp(0.5 * np.cos(math.pi * x)))
    zero_phi = make_field(grid1d, 0.0)
    cfg = GradIneqConfig(p=2.0, eta=1.0, c_value=0.0)
    lhs, rhs, ok = check_gradient_inequality(zero_phi, psi, cfg)
    assert lhs == 0.0 and ok
    assert required_constant(zero_phi, psi, 2.0, 1.0) == 0.0

    phi = ScalarField(grid1d, np.cos(math.pi * x) ** 2)
    flat_psi = make_field(grid1d, 2.0)
    lhs, rhs, ok = check_gradient_inequality(phi, flat_psi, cfg)
    assert lhs == 0.0 and ok
    assert required_constant(phi, flat_psi, 2.0, 1.0) == 0.0


def test_required_constant_is_the_threshold(rng):
    grid = make_grid(1, [1.0], [48])
    found = False
    for _ in range(20):
        phi, psi = random_pair(grid, rng)
        c = required_constant(phi, psi, 2.0, 0.01)  # small eta forces c > 0
        if c <= 0.0:
            continue
        found = True
        above = GradIneqConfig(p=2.0, eta=0.01, c_value=c * (1.0 + 1e-9))
        below = GradIneqConfig(p=2.0, eta=0.01, c_value=c * (1.0 - 1e-6))
        assert check_gradient_inequality(phi, psi, above)[2]
        assert not check_gradient_inequality(phi, psi, below)[2]
    assert found


def test_random_pairs_satisfy_the_sign_conventions(rng):
    grid = make_grid(1, [1.0], [32])
    for _ in range(5):
        phi, psi = random_pair(grid, rng)
        assert float(np.min(phi.values)) >= 0.0
        assert float(np.min(psi.values)) > 0.0


def test_fit_over_pairs_is_the_running_max(rng):
    grid = make_grid(1, [1.0], [32])
    pairs = [random_pair(grid, rng) for _ in range(6)]
    etas = (0.25, 1.0, 4.0)
    want = max(
        required_constant(phi, psi, 2.0, eta) for phi, psi in pairs for eta in etas
    )
    assert fit_over_pairs(pairs, 2.0, etas) == want


def test_fitted_constant_covers_its_own_corpus():
    grid = make_grid(1, [1.0], [32])
    c = fit_inequality_constant(2.0, (0.25, 1.0, 4.0), 20, grid, seed=3)
    assert c == fit_inequality_constant(2.0, (0.25, 1.0, 4.0), 20, grid, seed=3)
    rng = np.random.default_rng(3)
    pairs = [random_pair(grid, rng) for _ in range(20)]
    assert count_violations(pairs, 2.0, (0.25, 1.0, 4.0), c * (1.0 + 1e-9)) == 0
    if c > 0:
        assert count_violations(pairs, 2.0, (0.25, 1.0, 4.0), c * (1.0 - 1e-6)) >= 1
