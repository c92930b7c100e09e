"""Run diagnostics: per-time records, a certified dual-norm proxy, the
total-variation series with its consumption-budget certificate, and the
empirical constant fit for the weighted gradient interpolation inequality.

The dual norm of a mean-zero field against W^{2,inf} test functions is
approximated from below by maximizing |int F psi| over a fixed dictionary:
the constant, low Neumann cosine modes, and optional plateau bumps, each
normalized by an analytic upper bound on max(sup|psi|, sup|Dpsi|, sup|D2psi|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .fields import (
    Grid,
    ScalarField,
    grad_cell_sq,
    integrate,
    laplacian,
    lp_norm,
)
from .motility import MotilitySpec, envelope_constants

if TYPE_CHECKING:  # pragma: no cover
    from .solver import SolverState, Trajectory

__all__ = [
    "DiagnosticsRecord",
    "DIAGNOSTICS_COLUMNS",
    "diagnostics_step",
    "write_diagnostics_csv",
    "read_diagnostics_csv",
    "nonconstancy",
    "DictEntry",
    "TestFunctionDictionary",
    "build_dictionary",
    "plateau_height",
    "dual_norm_proxy",
    "TVReport",
    "tv_series",
    "write_tv_csv",
    "GradIneqConfig",
    "check_gradient_inequality",
    "required_constant",
    "random_pair",
    "fit_over_pairs",
    "fit_inequality_constant",
    "count_violations",
]

# quintic smoothstep derivative sups on [0, 1]
_S1_MAX = 1.875
_S2_MAX = 10.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    dt: float
    mass_u: float
    min_u: float
    max_u: float
    l1_v: float
    max_v: float
    min_v: float
    cumulative_uv: float
    cumulative_u2v: float
    cumulative_gradv4: float
    l2_u: float
    l4_u: float
    l8_u: float
    sup_gradv: float
    nonconstancy_u: float


DIAGNOSTICS_COLUMNS = (
    "t", "dt", "mass_u", "min_u", "max_u", "l1_v", "max_v", "min_v",
    "cumulative_uv", "cumulative_u2v", "cumulative_gradv4",
    "l2_u", "l4_u", "l8_u", "sup_gradv", "nonconstancy_u",
)


def nonconstancy(field: ScalarField) -> float:
    """L1 distance to the field's own mean, normalized by the box volume."""
    mean = integrate(field) / field.grid.volume
    dev = ScalarField(field.grid, field.values - mean)
    return lp_norm(dev, 1.0) / field.grid.volume


def diagnostics_step(state: "SolverState", dt: float = 0.0) -> DiagnosticsRecord:
    u = state.u
    v = state.v
    return DiagnosticsRecord(
        t=state.t,
        dt=dt,
        mass_u=integrate(u),
        min_u=float(np.min(u.values)),
        max_u=float(np.max(u.values)),
        l1_v=lp_norm(v, 1.0),
        max_v=float(np.max(v.values)),
        min_v=float(np.min(v.values)),
        cumulative_uv=state.cumulative_uv,
        cumulative_u2v=state.cumulative_u2v,
        cumulative_gradv4=state.cumulative_gradv4,
        l2_u=lp_norm(u, 2.0),
        l4_u=lp_norm(u, 4.0),
        l8_u=lp_norm(u, 8.0),
        sup_gradv=math.sqrt(float(np.max(grad_cell_sq(v)))),
        nonconstancy_u=nonconstancy(u),
    )


def write_diagnostics_csv(records: Sequence[DiagnosticsRecord], path: str | Path) -> None:
    lines = [",".join(DIAGNOSTICS_COLUMNS)]
    for r in records:
        lines.append(",".join(repr(getattr(r, col)) for col in DIAGNOSTICS_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")


def read_diagnostics_csv(path: str | Path) -> list[DiagnosticsRecord]:
    lines = Path(path).read_text().strip().splitlines()
    if lines[0] != ",".join(DIAGNOSTICS_COLUMNS):
        raise ValueError(f"{path}: unexpected diagnostics header")
    out = []
    for line in lines[1:]:
        vals = [float(x) for x in line.split(",")]
        out.append(DiagnosticsRecord(*vals))
    return out


def _inner(f: ScalarField, g: ScalarField) -> float:
    return math.fsum((f.values * g.values).ravel()) * f.grid.cellvol


@dataclass(frozen=True)
class DictEntry:
    name: str
    field: ScalarField
    lap: ScalarField
    lap_inf: float
    certificate: float


@dataclass(frozen=True)
class TestFunctionDictionary:
    grid: Grid
    entries: tuple[DictEntry, ...]


def _entry(grid: Grid, name: str, values: np.ndarray, certificate: float) -> DictEntry:
    field = ScalarField(grid, values / certificate)
    lap = laplacian(field)
    return DictEntry(
        name=name,
        field=field,
        lap=lap,
        lap_inf=float(np.max(np.abs(lap.values))),
        certificate=1.0,
    )


def _bump_values(grid: Grid, center: Sequence[float], radius: float) -> tuple[np.ndarray, float]:
    """Radial plateau bump: c3 inside B_R, quintic decay to zero at 2R.

    Returns the unnormalized profile (plateau 1) and the analytic certificate
    of its W^{2,inf} norm, so that dividing gives plateau height
    c3 = 1 / certificate and norm at most one.
    """
    r2 = np.zeros(grid.cells)
    for axis in range(grid.dim):
        x = grid.axis_centers(axis)
        shape = [1] * grid.dim
        shape[axis] = -1
        r2 = r2 + (x.reshape(shape) - center[axis]) ** 2
    r = np.sqrt(r2)
    s = np.clip((r - radius) / radius, 0.0, 1.0)
    smooth = s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    profile = 1.0 - smooth
    d1 = _S1_MAX / radius
    d2 = _S2_MAX / radius**2
    if grid.dim == 1:
        cert = max(1.0, d1, d2)
    else:
        # radial Hessian entries are bounded by |psi''| + |psi'|/r with r >= R
        cert = max(1.0, d1, d2 + d1 / radius)
    return profile, cert


def build_dictionary(grid: Grid, n_modes: int | None = None,
                     bumps: Sequence[tuple[Sequence[float], float]] = ()) -> TestFunctionDictionary:
    """Constant + leading Neumann cosine modes + optional plateau bumps.

    Every entry satisfies the discrete no-flux condition by construction and
    carries certificate 1 after normalization.
    """
    if n_modes is None:
        n_modes = 8 if grid.dim == 1 else 24
    entries = [_entry(grid, "const", np.ones(grid.cells), 1.0)]
    if grid.dim == 1:
        x = grid.axis_centers(0)
        for m in range(1, n_modes + 1):
            k = m * math.pi / grid.lengths[0]
            cert = max(1.0, k, k * k)
            entries.append(_entry(grid, f"cos{m}", np.cos(k * x), cert))
    else:
        x, y = grid.meshgrid()
        pairs = [
            (a, b)
            for a in range(n_modes + 1)
            for b in range(n_modes + 1)
            if (a, b) != (0, 0)
        ]
        pairs.sort(key=lambda ab: ((ab[0] / grid.lengths[0]) ** 2
                                   + (ab[1] / grid.lengths[1]) ** 2, ab))
        for a, b in pairs[:n_modes]:
            kx = a * math.pi / grid.lengths[0]
            ky = b * math.pi / grid.lengths[1]
            cert = max(1.0, kx, ky, kx * kx, ky * ky, kx * ky)
            vals = np.cos(kx * x) * np.cos(ky * y)
            entries.append(_entry(grid, f"cos{a}_{b}", vals, cert))
    for i, (center, radius) in enumerate(bumps, start=1):
        vals, cert = _bump_values(grid, center, radius)
        entries.append(_entry(grid, f"bump{i}", vals, cert))
    return TestFunctionDictionary(grid=grid, entries=tuple(entries))


def plateau_height(grid: Grid, radius: float) -> float:
    """Plateau value c3 of a dictionary bump of the given radius."""
    _, cert = _bump_values(grid, (0.0,) * grid.dim, radius)
    return 1.0 / cert


def dual_norm_proxy(field: ScalarField, dictionary: TestFunctionDictionary) -> float:
    """Certified lower bound of the W^{2,inf} dual norm: best dictionary pairing."""
    if field.grid != dictionary.grid:
        raise ValueError("field and dictionary grids differ")
    return max(abs(_inner(field, e.field)) for e in dictionary.entries)


@dataclass(frozen=True)
class TVReport:
    times: tuple[float, ...]
    interval_proxy: tuple[float, ...]
    interval_bound: tuple[float, ...]
    total_variation: float
    total_bound: float
    max_violation: float


def _snapshot_at(traj: "Trajectory", t: float) -> "SolverState":
    for snap in traj.snapshots:
        if math.isclose(snap.t, t, rel_tol=1e-12, abs_tol=1e-12):
            return snap
    raise ValueError(f"no snapshot recorded at t = {t}; pass it as a snapshot time")


def tv_series(traj: "Trajectory", dictionary: TestFunctionDictionary,
              times: Sequence[float]) -> TVReport:
    """Dual-proxy total variation of u over a partition, with per-interval
    certificates.

    Summation by parts turns each increment against a test function into a
    flux-weighted sum, so |int (u(t2) - u(t1)) psi| is bounded by
    ||lap_h psi||_inf * (eps * mass_u0 * (t2 - t1) + Lam * d cumulative_uv);
    the bound is exact in the discrete time-step arithmetic, slack is rounding.
    """
    times = [float(t) for t in times]
    if len(times) < 2 or any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("need strictly increasing partition times")
    if not traj.spec.degenerate:
        raise ValueError("the consumption certificate needs a degenerate motility")
    snaps = [_snapshot_at(traj, t) for t in times]
    K = snaps[0].max_v0
    lam_hi = envelope_constants(traj.spec, K)[1] if K > 0 else 0.0
    eps = traj.params.eps
    mass0 = snaps[0].mass_u0
    proxies = []
    bounds = []
    max_violation = 0.0
    for lo, hi in zip(snaps, snaps[1:]):
        diff = ScalarField(traj.grid, hi.u.values - lo.u.values)
        budget = eps * mass0 * (hi.t - lo.t) + lam_hi * (hi.cumulative_uv - lo.cumulative_uv)
        best = 0.0
        best_bound = 0.0
        for e in dictionary.entries:
            pairing = abs(_inner(diff, e.field))
            bound = e.lap_inf * budget
            best = max(best, pairing)
            best_bound = max(best_bound, bound)
            max_violation = max(max_violation, pairing - bound)
        proxies.append(best)
        bounds.append(best_bound)
    return TVReport(
        times=tuple(times),
        interval_proxy=tuple(proxies),
        interval_bound=tuple(bounds),
        total_variation=math.fsum(proxies),
        total_bound=math.fsum(bounds),
        max_violation=max_violation,
    )


def write_tv_csv(report: TVReport, path: str | Path) -> None:
    lines = ["t_lo,t_hi,proxy,certified_bound"]
    for k in range(len(report.interval_proxy)):
        lines.append(
            f"{report.times[k]!r},{report.times[k + 1]!r},"
            f"{report.interval_proxy[k]!r},{report.interval_bound[k]!r}"
        )
    lines.append(f"total,,{report.total_variation!r},{report.total_bound!r}")
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class GradIneqConfig:
    p: float
    eta: float
    c_value: float

    def __post_init__(self) -> None:
        if self.p < 2:
            raise ValueError("inequality needs p >= 2")
        if self.eta <= 0:
            raise ValueError("inequality needs eta > 0")
        if self.c_value < 0:
            raise ValueError("constant must be nonnegative")


def _ineq_terms(phi_f: ScalarField, psi_f: ScalarField, p: float):
    if np.any(psi_f.values <= 0.0):
        raise ValueError("psi must be strictly positive")
    if np.any(phi_f.values < 0.0):
        raise ValueError("phi must be nonnegative")
    vol = phi_f.grid.cellvol
    phi = phi_f.values
    psi = psi_f.values
    gphi2 = grad_cell_sq(phi_f)
    gpsi2 = grad_cell_sq(psi_f)
    lhs = math.fsum((phi**p * gpsi2 / psi).ravel()) * vol
    t_grad = math.fsum((phi ** (p - 2.0) * psi * gphi2).ravel()) * vol
    t_mass = math.fsum((phi * psi).ravel()) * vol
    int_phip = math.fsum((phi**p).ravel()) * vol
    int_phi = math.fsum(phi.ravel()) * vol
    t_psi = math.fsum((gpsi2 * gpsi2 / psi**3).ravel()) * vol
    shape = int_phip + int_phi ** (2.0 * p - 1.0)
    return lhs, t_grad, t_mass, shape, t_psi


def check_gradient_inequality(phi_f: ScalarField, psi_f: ScalarField,
                              cfg: GradIneqConfig) -> tuple[float, float, bool]:
    """Evaluate both sides of the weighted gradient interpolation inequality

        int phi^p |grad psi|^2 / psi
          <= eta int phi^(p-2) psi |grad phi|^2 + eta int phi psi
             + C (1 + 1/eta) (int phi^p + (int phi)^(2p-1)) int |grad psi|^4 / psi^3

    and report (lhs, rhs, lhs <= rhs)."""
    lhs, t_grad, t_mass, shape, t_psi = _ineq_terms(phi_f, psi_f, cfg.p)
    rhs = cfg.eta * (t_grad + t_mass) + cfg.c_value * (1.0 + 1.0 / cfg.eta) * shape * t_psi
    return lhs, rhs, lhs <= rhs


def required_constant(phi_f: ScalarField, psi_f: ScalarField, p: float,
                      eta: float) -> float:
    """Smallest admissible C for one pair at one eta (0 when eta alone covers)."""
    lhs, t_grad, t_mass, shape, t_psi = _ineq_terms(phi_f, psi_f, p)
    numerator = lhs - eta * (t_grad + t_mass)
    if numerator <= 0.0:
        return 0.0
    denom = (1.0 + 1.0 / eta) * shape * t_psi
    if denom == 0.0:
        # grad psi vanishes identically, so lhs is zero too; unreachable here
        raise ValueError("degenerate pair with positive lhs and zero denominator")
    return numerator / denom


def _cos_series(grid: Grid, rng: np.random.Generator, modes: int) -> np.ndarray:
    out = np.zeros(grid.cells)
    if grid.dim == 1:
        x = grid.axis_centers(0)
        for m in range(1, modes + 1):
            c = rng.normal() / (1.0 + m) ** 2
            out += c * np.cos(m * math.pi * x / grid.lengths[0])
    else:
        x, y = grid.meshgrid()
        for a in range(modes + 1):
            for b in range(modes + 1):
                if a == 0 and b == 0:
                    continue
                c = rng.normal() / (1.0 + a + b) ** 2
                out += c * np.cos(a * math.pi * x / grid.lengths[0]) * np.cos(
                    b * math.pi * y / grid.lengths[1]
                )
    peak = np.max(np.abs(out))
    if peak > 0:
        out *= rng.uniform(0.5, 1.5) / peak
    return out


def random_pair(grid: Grid, rng: np.random.Generator,
                modes: int = 6) -> tuple[ScalarField, ScalarField]:
    """Smooth nonnegative phi (squared cosine series, so it has honest zeros)
    and strictly positive psi (exponentiated series)."""
    phi = ScalarField(grid, _cos_series(grid, rng, modes) ** 2)
    psi = ScalarField(grid, np.exp(1.5 * _cos_series(grid, rng, modes)))
    return phi, psi


def fit_over_pairs(pairs: Iterable[tuple[ScalarField, ScalarField]], p: float,
                   eta_grid: Sequence[float]) -> float:
    best = 0.0
    for phi_f, psi_f in pairs:
        for eta in eta_grid:
            best = max(best, required_constant(phi_f, psi_f, p, eta))
    return best


def fit_inequality_constant(p: float, eta_grid: Sequence[float], corpus_size: int,
                            grid: Grid, seed: int, modes: int = 6) -> float:
    """Empirical constant: max over a random corpus of the per-pair minimum C."""
    rng = np.random.default_rng(seed)
    pairs = [random_pair(grid, rng, modes) for _ in range(corpus_size)]
    return fit_over_pairs(pairs, p, eta_grid)


def count_violations(pairs: Iterable[tuple[ScalarField, ScalarField]], p: float,
                     eta_grid: Sequence[float], c_value: float) -> int:
    bad = 0
    for phi_f, psi_f in pairs:
        for eta in eta_grid:
            cfg = GradIneqConfig(p=p, eta=eta, c_value=c_value)
            _, _, ok = check_gradient_inequality(phi_f, psi_f, cfg)
            if not ok:
                bad += 1
    return bad
