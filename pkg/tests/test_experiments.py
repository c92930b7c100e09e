"""Experiment plumbing: initial-data builders, the certified movement rate,
driver dispatch, and the signal-mass threshold sweep."""

import math

import numpy as np
import pytest

from taxislab.config import Config, ConfigError, parse_config
from taxislab.diagnostics import build_dictionary
from taxislab.experiments import (
    BUMP_CENTERS_1D,
    WITNESS_RADIUS,
    bell_with_mass,
    bell_with_width,
    certified_movement_rate,
    plateau_bump,
    run_experiment,
    sweep_v0_mass,
    two_bump_u,
    worker_count,
)
from taxislab.fields import ScalarField, integrate, make_field, make_grid
from taxislab.motility import envelope_constants, linear, shifted
from taxislab.solver import SimParams, simulate


# --------------------------------------------------------------------------
# initial data builders


def test_plateau_bump_shape():
    grid = make_grid(1, [1.0], [10])
    vals = plateau_bump(grid, (0.5,), 0.1)
    x = grid.axis_centers(0)
    assert np.all(vals[np.abs(x - 0.5) <= 0.1] == 1.0)
    assert np.all(vals[np.abs(x - 0.5) >= 0.2] == 0.0)
    assert np.all((0.0 <= vals) & (vals <= 1.0))
    # x = 0.65 sits mid-ramp, where the quintic crosses one half
    assert vals[6] == pytest.approx(0.5, rel=1e-12)


def test_two_bump_u_levels():
    grid = make_grid(1, [1.0], [160])
    f = two_bump_u(grid, base=1.0, height=2.0)
    x = grid.axis_centers(0)
    on_plateau = np.abs(x - 0.675) <= 0.0625
    outside = (x <= 0.55) | (x >= 0.8)
    assert np.all(f.values[on_plateau] == 3.0)
    assert np.all(f.values[outside] == 1.0)
    assert float(np.min(f.values)) >= 1.0


def test_two_bump_u_2d_stays_inside_the_box():
    grid = make_grid(2, [1.0, 1.0], [48, 48])
    f = two_bump_u(grid, base=0.5, height=1.5)
    assert float(np.max(f.values)) == 2.0
    assert f.values[0, 0] == 0.5 and f.values[-1, -1] == 0.5


def test_bell_with_width_centers_by_default():
    grid = make_grid(1, [1.0], [64])
    f = bell_with_width(grid, peak=0.25, radius=0.1)
    x = grid.axis_centers(0)
    assert np.all(f.values[np.abs(x - 0.5) <= 0.1] == 0.25)
    assert f.values[0] == 0.0 and f.values[-1] == 0.0


def test_bell_with_mass_hits_the_requested_integral():
    grid = make_grid(1, [1.0], [256])
    for mass in (0.01, 0.05, 0.1):
        f = bell_with_mass(grid, peak=0.25, mass=mass)
        assert integrate(f) == pytest.approx(mass, rel=1e-9)
        assert float(np.max(f.values)) == 0.25
        assert float(np.min(f.values)) == 0.0


def test_bell_with_mass_rejects_unreachable_targets():
    grid = make_grid(1, [1.0], [25])
    with pytest.raises(ValueError, match="out of reach"):
        bell_with_mass(grid, peak=0.25, mass=10.0)
    with pytest.raises(ValueError, match="below the single-cell floor"):
        bell_with_mass(grid, peak=1.0, mass=1e-3)


def test_bell_with_mass_warns_when_barely_resolved():
    grid = make_grid(1, [1.0], [64])
    with pytest.warns(RuntimeWarning, match="barely resolved"):
        bell_with_mass(grid, peak=1.0, mass=0.05)


# --------------------------------------------------------------------------
# movement certificate


def _movement_setup(spec):
    grid = make_grid(1, [1.0], [64])
    u0 = two_bump_u(grid)
    v0 = bell_with_width(grid, peak=0.3, radius=0.1)
    traj = simulate(u0, v0, spec, SimParams(t_end=0.2, eps=0.01))
    bumps = tuple(((c,), WITNESS_RADIUS) for c in BUMP_CENTERS_1D)
    return traj, build_dictionary(grid, bumps=bumps)


def test_certified_movement_rate_follows_its_own_formula():
    traj, dictionary = _movement_setup(linear())
    rate = certified_movement_rate(traj, dictionary)
    assert rate > 0.0
    first = traj.records[0]
    lam_hi = envelope_constants(linear(), first.max_v)[1]
    maxlap = max(e.lap_inf for e in dictionary.entries)
    budget = 0.01 * first.mass_u * traj.final.t + lam_hi * traj.final.cumulative_uv
    assert rate == pytest.approx(maxlap * budget / first.l1_v, rel=1e-12)


def test_certified_movement_rate_rejects_nondegenerate_runs():
    traj, dictionary = _movement_setup(shifted(0.5, linear()))
    with pytest.raises(ValueError, match="degenerate motility"):
        certified_movement_rate(traj, dictionary)


def test_certified_movement_rate_needs_initial_signal():
    grid = make_grid(1, [1.0], [32])
    u0 = two_bump_u(grid)
    with pytest.warns(RuntimeWarning):
        traj = simulate(u0, make_field(grid, 0.0), linear(), SimParams(t_end=0.01))
    d = build_dictionary(grid)
    with pytest.raises(ValueError, match="without initial signal"):
        certified_movement_rate(traj, d)


# --------------------------------------------------------------------------
# worker pool sizing


def test_worker_count_reads_the_environment(monkeypatch):
    monkeypatch.delenv("TAXISLAB_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("TAXISLAB_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("TAXISLAB_THREADS", "two")
    with pytest.raises(ValueError, match="must be an integer"):
        worker_count()
    monkeypatch.setenv("TAXISLAB_THREADS", "0")
    with pytest.raises(ValueError, match="at least 1"):
        worker_count()


# --------------------------------------------------------------------------
# driver dispatch


def test_run_experiment_rejects_unknown_ids(tmp_path):
    bogus = Config(experiment="EX_nothing", values={})
    with pytest.raises(ConfigError, match="no driver for experiment"):
        run_experiment(bogus, tmp_path)


def test_counterexample_driver_end_to_end(tmp_path):
    config = parse_config(
        "experiment = E5b_counterexample\n"
        "grid.cells = 128\n"
        "family.k_max = 2\n"
    )
    result = run_experiment(config, tmp_path)
    assert result.experiment == "E5b_counterexample"
    assert result.passed
    assert all(line.startswith("PASS") for line in result.lines)
    verdict = result.artifacts["verdict"]
    assert verdict.read_text().strip().split("\n") == result.lines
    report = result.artifacts["report"]
    assert report.exists()
    assert report.read_text().startswith("k,gap,budget_integral")


def test_inequality_driver_seed_override(tmp_path):
    config = parse_config(
        "experiment = E6_inequality_fit\n"
        "grid.cells = 32\n"
        "fit.corpus = 10\n"
        "fit.validation = 10\n"
    )
    a = run_experiment(config, tmp_path / "a", seed=11)
    b = run_experiment(config, tmp_path / "b", seed=11)
    assert (a.artifacts["report"].read_text()
            == b.artifacts["report"].read_text())
    c = run_experiment(config, tmp_path / "c", seed=12)
    assert (a.artifacts["report"].read_text()
            != c.artifacts["report"].read_text())


# --------------------------------------------------------------------------
# signal-mass threshold sweep


def _sweep_config():
    return parse_config(
        "experiment = E3_pattern_threshold\n"
        "grid.cells = 64\n"
        "run.t_end = 1.0\n"
        "run.diag_stride = 200\n"
    )


def test_sweep_rejects_wrong_experiments_and_bad_lists():
    e1 = parse_config("experiment = E1_boundedness\n")
    with pytest.raises(ConfigError, match="mass sweep drives the E3"):
        sweep_v0_mass(e1, [0.02, 0.01])
    config = _sweep_config()
    with pytest.raises(ValueError, match="positive masses"):
        sweep_v0_mass(config, [])
    with pytest.raises(ValueError, match="positive masses"):
        sweep_v0_mass(config, [0.02, -0.01])
    with pytest.raises(ValueError, match="strictly decreasing"):
        sweep_v0_mass(config, [0.01, 0.02])


def test_sweep_reports_the_scan(tmp_path):
    report = sweep_v0_mass(_sweep_config(), [0.05, 0.03], out_dir=tmp_path)
    assert report.deltas == (0.05, 0.03)
    assert len(report.ratios) == 2 and len(report.proxies) == 2
    assert all(r >= 0.0 for r in report.ratios)
    assert all(p >= 0.0 for p in report.proxies)
    assert report.xi_hat > 0.0
    assert report.delta_hat > 0.0
    assert report.threshold is None or report.threshold in report.deltas
    csv = (tmp_path / "threshold_report.csv").read_text().strip().split("\n")
    assert csv[0] == "delta,ratio,net_movement_proxy"
    assert len(csv) == 1 + 2 + 3  # rows plus threshold/xi_hat/delta_hat notes
    assert csv[-1].startswith("# delta_hat = ")
    row = csv[1].split(",")
    assert float(row[0]) == 0.05
    assert float(row[1]) == report.ratios[0]
    assert float(row[2]) == report.proxies[0]
