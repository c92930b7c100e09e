"""Quantitative positivity probe and its sharpness counterexample for

    V_t = lap V + div(a V) + b V,   a . nu = 0 on the walls.

The probe evolves random coefficient pairs under fixed integrability budgets
and records how far the solution stays from zero.  The counterexample runs a
family of blow-down potentials b_k whose budgets stay bounded while the
solution at the center is squeezed under an explicit barrier whose infimum
tends to zero, which is what rules out a budget-only positivity constant in
the supercritical exponent range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .fields import Grid, ScalarField, VectorField, make_grid

__all__ = [
    "exponent_condition",
    "supercritical_exponents",
    "linear_cfl",
    "step_linear",
    "MPProbeConfig",
    "ProbeInstance",
    "MPProbeResult",
    "probe_lower_bound",
    "window_inf",
    "CounterexampleSpec",
    "default_counterexample",
    "verify_g_condition",
    "build_counterexample",
    "barrier",
    "barrier_field",
    "residual_min",
    "CounterexampleRow",
    "CounterexampleReport",
    "run_counterexample",
    "write_counterexample_csv",
]


def exponent_condition(p1: float, q1: float, p2: float, q2: float, n: int) -> bool:
    """Subcritical integrability: 1/q1 + n/(2 p1) < 1/2 and 1/q2 + n/(2 p2) < 1."""
    return (1.0 / q1 + n / (2.0 * p1) < 0.5) and (1.0 / q2 + n / (2.0 * p2) < 1.0)


def supercritical_exponents(p: float, q: float, n: int) -> bool:
    """The zero-order exponent range where positivity fails: 1/q + n/(2p) > 1."""
    return 1.0 / q + n / (2.0 * p) > 1.0


def _vector_abs_max(a: VectorField) -> float:
    return max(float(np.max(np.abs(comp))) for comp in a.components)


def linear_cfl(grid: Grid, a_abs_max: float, b_neg_max: float) -> float:
    """Positivity threshold of the explicit linear stencil (safety factor 1)."""
    h = grid.h_min
    return 1.0 / (2.0 * grid.dim / (h * h) + b_neg_max + a_abs_max / h)


def step_linear(V: ScalarField, a: VectorField, b: ScalarField, dt: float) -> ScalarField:
    """One explicit step; rejects dt above the linear CFL threshold."""
    grid = V.grid
    if a.grid != grid or b.grid != grid:
        raise ValueError("V, a, b must share a grid")
    if dt <= 0:
        raise ValueError("dt must be positive")
    b_neg = max(0.0, -float(np.min(b.values)))
    bound = linear_cfl(grid, _vector_abs_max(a), b_neg)
    if dt > bound * (1.0 + 1e-9):
        raise ValueError(f"dt {dt} exceeds the linear CFL bound {bound}")
    if grid.dim == 1:
        out, _, _, _ = kernels.step_linear_1d(
            V.values, a.components[0], b.values, dt,
            1.0 / grid.h[0] ** 2, 1.0 / grid.h[0],
        )
    else:
        out, _, _, _ = kernels.step_linear_2d(
            V.values, a.components[0], a.components[1], b.values, dt,
            1.0 / grid.h[0] ** 2, 1.0 / grid.h[1] ** 2,
            1.0 / grid.h[0], 1.0 / grid.h[1],
        )
    return ScalarField(grid, out)


# --------------------------------------------------------------------------
# positivity probe


@dataclass(frozen=True)
class MPProbeConfig:
    """Budgeted-coefficient probe setup.

    The exponent quadruple must satisfy the subcritical condition; L bounds
    both coefficient budgets and the initial-data envelope; the window
    (tau, T] is where the infimum is measured.
    """

    grid: Grid
    p1: float
    q1: float
    p2: float
    q2: float
    L: float
    T: float
    tau: float
    seed: int = 0
    family: str = "segments"
    cfl_safety: float = 0.8
    segments: int = 3

    def __post_init__(self) -> None:
        if not exponent_condition(self.p1, self.q1, self.p2, self.q2, self.grid.dim):
            raise ValueError(
                "exponents miss the subcritical integrability condition; "
                "the positivity bound is out of scope there"
            )
        if self.L <= 0 or self.T <= 0 or not 0 <= self.tau < self.T:
            raise ValueError("need L > 0, T > 0, 0 <= tau < T")
        if self.family != "segments":
            raise ValueError(f"unknown coefficient family {self.family!r}")


@dataclass(frozen=True)
class ProbeInstance:
    budget_a: float
    budget_b: float
    sup_V0: float
    mass_V0: float
    inf_window: float
    times: np.ndarray = field(repr=False)
    mins: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class MPProbeResult:
    config: MPProbeConfig
    empirical_C: float
    instances: tuple[ProbeInstance, ...]


def _sin_profile_faces(grid: Grid, rng: np.random.Generator) -> tuple[list[np.ndarray], np.ndarray]:
    """Random drift with vanishing wall-normal component; returns the face
    arrays plus the cell-centered magnitude used for the budget norm."""
    coeffs = rng.normal(size=3) / np.array([1.0, 2.0, 3.0])
    if grid.dim == 1:
        L = grid.lengths[0]
        xf = grid.axis_faces(0)
        xc = grid.axis_centers(0)
        prof_f = sum(c * np.sin((m + 1) * math.pi * xf / L) for m, c in enumerate(coeffs))
        prof_c = sum(c * np.sin((m + 1) * math.pi * xc / L) for m, c in enumerate(coeffs))
        return [prof_f], np.abs(prof_c)
    Lx, Ly = grid.lengths
    xfx = grid.axis_faces(0)[:, None]
    ycx = grid.axis_centers(1)[None, :]
    xcy = grid.axis_centers(0)[:, None]
    yfy = grid.axis_faces(1)[None, :]
    xc = grid.axis_centers(0)[:, None]
    yc = grid.axis_centers(1)[None, :]
    cx, cy = coeffs[0], coeffs[1]
    ax = cx * np.sin(math.pi * xfx / Lx) * np.cos(math.pi * ycx / Ly)
    ay = cy * np.sin(math.pi * yfy / Ly) * np.cos(math.pi * xcy / Lx)
    ax_c = cx * np.sin(math.pi * xc / Lx) * np.cos(math.pi * yc / Ly)
    ay_c = cy * np.sin(math.pi * yc / Ly) * np.cos(math.pi * xc / Lx)
    return [ax, ay], np.sqrt(ax_c**2 + ay_c**2)


def _cos_field(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    out = np.zeros(grid.cells)
    if grid.dim == 1:
        x = grid.axis_centers(0)
        for m in range(4):
            out += rng.normal() / (1.0 + m) * np.cos(m * math.pi * x / grid.lengths[0])
    else:
        x, y = grid.meshgrid()
        for a in range(3):
            for b in range(3):
                out += rng.normal() / (1.0 + a + b) * np.cos(
                    a * math.pi * x / grid.lengths[0]
                ) * np.cos(b * math.pi * y / grid.lengths[1])
    return out


def _probe_initial(grid: Grid, rng: np.random.Generator, L: float,
                   kind: int) -> np.ndarray:
    if kind == 0:
        return np.full(grid.cells, L / 2.0)
    if kind == 1:
        raw = np.exp(0.8 * _cos_field(grid, rng))
        return raw * (L / 2.0) / np.max(raw)
    # compact plateau away from the walls, honest zeros outside
    r2 = np.zeros(grid.cells)
    for axis in range(grid.dim):
        Lax = grid.lengths[axis]
        c = Lax * rng.uniform(0.4, 0.6)
        x = grid.axis_centers(axis)
        shape = [1] * grid.dim
        shape[axis] = -1
        r2 = r2 + ((x.reshape(shape) - c) / (0.25 * Lax)) ** 2
    s = np.clip(np.sqrt(r2), 0.0, 1.0)
    profile = 1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    return 0.8 * L * profile


def _lp_of_values(vals: np.ndarray, p: float, cellvol: float) -> float:
    return float((np.sum(np.abs(vals) ** p) * cellvol) ** (1.0 / p))


def probe_lower_bound(config: MPProbeConfig, instances: int) -> MPProbeResult:
    """Evolve random budget-saturating instances and report the worst-case
    infimum over the window.

    Coefficients are piecewise constant in time over equal segments, scaled
    so each budget integral meets L exactly; steps land on segment ends, so
    the runtime Riemann quadrature reproduces the scaling."""
    if instances < 1:
        raise ValueError("need at least one instance")
    grid = config.grid
    rng = np.random.default_rng(config.seed)
    vol = grid.cellvol
    records = []
    for idx in range(instances):
        face_arrs, a_mag_cells = _sin_profile_faces(grid, rng)
        b_hat = _cos_field(grid, rng)
        b_hat -= 0.25 * np.max(np.abs(b_hat))  # bias toward a signed potential
        sig_a = rng.uniform(0.5, 1.5, size=config.segments)
        sig_b = rng.uniform(-1.2, 1.2, size=config.segments)
        if np.all(np.abs(sig_b) < 0.2):
            sig_b[0] = 1.0
        seg_len = config.T / config.segments

        norm_a = _lp_of_values(a_mag_cells, config.p1, vol)
        denom_a = norm_a ** config.q1 * seg_len * float(np.sum(sig_a**config.q1))
        if denom_a <= 0:
            raise RuntimeError("drift profile degenerated, cannot meet the budget")
        scale_a = (config.L / denom_a) ** (1.0 / config.q1)
        norm_b = _lp_of_values(b_hat, config.p2, vol)
        denom_b = norm_b ** config.q2 * seg_len * float(
            np.sum(np.abs(sig_b) ** config.q2)
        )
        if denom_b <= 0:
            raise RuntimeError("potential profile degenerated, cannot meet the budget")
        scale_b = (config.L / denom_b) ** (1.0 / config.q2)

        V = _probe_initial(grid, rng, config.L, idx % 3)
        sup_V0 = float(np.max(V))
        mass_V0 = float(np.sum(V) * vol)
        if sup_V0 > config.L or mass_V0 < 1.0 / config.L:
            raise RuntimeError(
                f"initial data generator broke its envelope: sup={sup_V0}, mass={mass_V0}"
            )

        times = []
        mins = []
        budget_a = 0.0
        budget_b = 0.0
        t = 0.0
        for s_idx in range(config.segments):
            amp_a = scale_a * sig_a[s_idx]
            amp_b = scale_b * sig_b[s_idx]
            a_faces = [amp_a * arr for arr in face_arrs]
            for arr, axis in zip(a_faces, range(grid.dim)):
                sl: list[slice | int] = [slice(None)] * grid.dim
                sl[axis] = 0
                arr[tuple(sl)] = 0.0
                sl[axis] = -1
                arr[tuple(sl)] = 0.0
            b_vals = amp_b * b_hat
            a_max = max(float(np.max(np.abs(arr))) for arr in a_faces)
            b_neg = max(0.0, -float(np.min(b_vals)))
            dt_max = config.cfl_safety * linear_cfl(grid, a_max, b_neg)
            n_steps = max(1, int(math.ceil(seg_len / dt_max - 1e-12)))
            dt = seg_len / n_steps
            norm_a_t = _lp_of_values(a_mag_cells * amp_a, config.p1, vol)
            norm_b_t = _lp_of_values(b_vals, config.p2, vol)
            for _ in range(n_steps):
                if grid.dim == 1:
                    V, _, mn, _ = kernels.step_linear_1d(
                        V, a_faces[0], b_vals, dt,
                        1.0 / grid.h[0] ** 2, 1.0 / grid.h[0],
                    )
                else:
                    V, _, mn, _ = kernels.step_linear_2d(
                        V, a_faces[0], a_faces[1], b_vals, dt,
                        1.0 / grid.h[0] ** 2, 1.0 / grid.h[1] ** 2,
                        1.0 / grid.h[0], 1.0 / grid.h[1],
                    )
                budget_a += dt * norm_a_t ** config.q1
                budget_b += dt * norm_b_t ** config.q2
                t += dt
                times.append(t)
                mins.append(mn)
            t = seg_len * (s_idx + 1)  # land exactly on the segment boundary

        if budget_a > config.L * (1.0 + 1e-9) or budget_b > config.L * (1.0 + 1e-9):
            raise RuntimeError(
                f"budget quadrature exceeded L: a={budget_a}, b={budget_b}"
            )
        times_arr = np.array(times)
        mins_arr = np.array(mins)
        window = mins_arr[times_arr > config.tau]
        records.append(
            ProbeInstance(
                budget_a=budget_a,
                budget_b=budget_b,
                sup_V0=sup_V0,
                mass_V0=mass_V0,
                inf_window=float(np.min(window)),
                times=times_arr,
                mins=mins_arr,
            )
        )
    empirical_C = min(r.inf_window for r in records)
    return MPProbeResult(config=config, empirical_C=empirical_C,
                         instances=tuple(records))


def window_inf(result: MPProbeResult, tau: float) -> float:
    """Worst-case infimum over (tau, T] re-read from the stored minima curves."""
    if not 0 <= tau < result.config.T:
        raise ValueError("tau must lie in [0, T)")
    vals = []
    for inst in result.instances:
        sel = inst.mins[inst.times > tau]
        vals.append(float(np.min(sel)))
    return min(vals)


# --------------------------------------------------------------------------
# blow-down counterexample


@dataclass(frozen=True)
class CounterexampleSpec:
    """Geometry and profile of the budget-bounded blow-down family.

    The potential is b_k(x, t) = -(T_k - t)^(-1) g(|x - x0| / sqrt(T_k - t))
    with T_k = T + 2^(-k), and the barrier (T_k - t)^alpha (xi^2 + 1) is a
    supersolution exactly when (xi^2 + 1) g(xi) >= 2n + alpha - (1 - alpha) xi^2.
    The default g is a plateau at height 2n + alpha with a quintic decay, which
    meets the condition with equality at xi = 0.
    """

    grid: Grid
    alpha: float = 0.5
    T: float = 1.0
    R: float = 0.5
    R0: float = 1.5
    p: float = 1.0
    q: float = 1.0
    g_height: float | None = None
    xi_plateau: float | None = None
    xi_support: float | None = None

    def __post_init__(self) -> None:
        n = self.grid.dim
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.T <= 0 or self.R <= 0 or self.R0 <= self.R:
            raise ValueError("need T > 0 and 0 < R < R0")
        if self.p < 1 or self.q < 1:
            raise ValueError("need p, q >= 1")
        if not supercritical_exponents(self.p, self.q, n):
            raise ValueError(
                "exponents are subcritical; the blow-down family only defeats "
                "the bound when 1/q + n/(2p) > 1"
            )
        e = (n / 2.0 - self.p) * self.q / self.p
        if e <= -1.0:
            raise ValueError("budget majorant diverges: need (n/2 - p) q / p > -1")
        half = [x / 2.0 for x in self.grid.lengths]
        if self.R >= min(half):
            raise ValueError("ball of radius R must fit inside the box")
        if math.sqrt(sum(x * x for x in half)) > self.R0:
            raise ValueError("box must sit inside the ball of radius R0")
        height = 2.0 * n + self.alpha
        if self.g_height is None:
            object.__setattr__(self, "g_height", height)
        if self.xi_plateau is None:
            object.__setattr__(self, "xi_plateau",
                               math.sqrt((2.0 * n + self.alpha) / (1.0 - self.alpha)))
        if self.xi_support is None:
            object.__setattr__(self, "xi_support", self.xi_plateau + 1.0)
        if not 0 < self.xi_plateau < self.xi_support:
            raise ValueError("need 0 < xi_plateau < xi_support")

    @property
    def center(self) -> tuple[float, ...]:
        return tuple(x / 2.0 for x in self.grid.lengths)

    def blow_time(self, k: int) -> float:
        if k < 1:
            raise ValueError("k must be >= 1")
        return self.T + 2.0 ** (-k)

    def initial_value(self) -> float:
        return min(self.T**self.alpha,
                   (self.T + 1.0) ** (self.alpha - 1.0) * self.R * self.R)


def default_counterexample(cells: int = 512, dim: int = 1) -> CounterexampleSpec:
    grid = make_grid(dim, [2.0] * dim, [cells] * dim)
    return CounterexampleSpec(grid=grid)


def g_profile(spec: CounterexampleSpec, xi: np.ndarray | float) -> np.ndarray | float:
    """Vectorized plateau profile, same polynomial as the jitted kernel."""
    arr = np.asarray(xi, dtype=np.float64)
    s = np.clip((arr - spec.xi_plateau) / (spec.xi_support - spec.xi_plateau), 0.0, 1.0)
    out = spec.g_height * (1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s)))
    return float(out) if np.isscalar(xi) else out


def residual_margin(spec: CounterexampleSpec, xi: np.ndarray | float):
    """(xi^2 + 1) g(xi) - (2n + alpha - (1 - alpha) xi^2); the supersolution
    inequality for the barrier is exactly margin >= 0."""
    n = spec.grid.dim
    arr = np.asarray(xi, dtype=np.float64)
    out = (arr * arr + 1.0) * g_profile(spec, arr) - (
        2.0 * n + spec.alpha - (1.0 - spec.alpha) * arr * arr
    )
    return float(out) if np.isscalar(xi) else out


def verify_g_condition(spec: CounterexampleSpec, samples: int = 400_001) -> float:
    """Minimum margin over a dense xi grid; the profile is usable iff >= 0."""
    xi = np.linspace(0.0, spec.xi_support + 1.0, samples)
    return float(np.min(residual_margin(spec, xi)))


def _dist_to_center(spec: CounterexampleSpec) -> np.ndarray:
    grid = spec.grid
    r2 = np.zeros(grid.cells)
    for axis in range(grid.dim):
        x = grid.axis_centers(axis)
        shape = [1] * grid.dim
        shape[axis] = -1
        r2 = r2 + (x.reshape(shape) - spec.center[axis]) ** 2
    return np.sqrt(r2)


def build_counterexample(spec: CounterexampleSpec, k: int):
    """Return (potential sampler t -> values, V0, T_k) for one family member."""
    margin = verify_g_condition(spec, samples=40_001)
    if margin < 0:
        raise ValueError(f"profile violates the supersolution condition: margin {margin}")
    t_blow = spec.blow_time(k)
    dist = _dist_to_center(spec)
    grid = spec.grid

    def potential(t: float) -> np.ndarray:
        out = np.empty(grid.cells)
        if grid.dim == 1:
            kernels.fill_blowdown_1d(out, dist, t, t_blow, spec.g_height,
                                     spec.xi_plateau, spec.xi_support)
        else:
            kernels.fill_blowdown_2d(out, dist, t, t_blow, spec.g_height,
                                     spec.xi_plateau, spec.xi_support)
        return out

    V0 = ScalarField(grid, np.full(grid.cells, spec.initial_value()))
    return potential, V0, t_blow


def barrier(spec: CounterexampleSpec, k: int, x: Sequence[float], t: float) -> float:
    """(T_k - t)^alpha ((|x - x0|^2 / (T_k - t)) + 1), the comparison barrier."""
    tau = spec.blow_time(k) - t
    if tau <= 0:
        raise ValueError("barrier is only defined before the blow-down time")
    r2 = sum((xi - ci) ** 2 for xi, ci in zip(x, spec.center))
    return tau**spec.alpha * (r2 / tau + 1.0)


def barrier_field(spec: CounterexampleSpec, k: int, t: float) -> ScalarField:
    tau = spec.blow_time(k) - t
    if tau <= 0:
        raise ValueError("barrier is only defined before the blow-down time")
    dist = _dist_to_center(spec)
    vals = tau**spec.alpha * (dist * dist / tau + 1.0)
    return ScalarField(spec.grid, vals)


def residual_min(spec: CounterexampleSpec, k: int, n_xi: int = 2001,
                 n_t: int = 201) -> float:
    """Minimum of the analytic supersolution residual of the barrier

        (T_k - t)^(alpha - 1) * margin(xi)

    over a space-time sample grid; derivatives are exact, not discretized."""
    t_blow = spec.blow_time(k)
    xi = np.linspace(0.0, spec.xi_support + 1.0, n_xi)
    margins = residual_margin(spec, xi)
    ts = np.linspace(0.0, spec.T, n_t)
    prefactor = (t_blow - ts) ** (spec.alpha - 1.0)
    return float(np.min(np.outer(prefactor, margins)))


@dataclass(frozen=True)
class CounterexampleRow:
    k: int
    gap: float
    budget_integral: float
    min_V_at_x0: float
    max_domination_ratio: float
    min_supersolution_residual: float


@dataclass(frozen=True)
class CounterexampleReport:
    spec: CounterexampleSpec
    rows: tuple[CounterexampleRow, ...]
    L_declared: float


def _budget_majorant(spec: CounterexampleSpec) -> float:
    """Closed-form-in-time bound c1^(q/p) int_0^(T+1) s^((n/2-p)q/p) ds for
    the budget integral, uniform over the whole family."""
    n = spec.grid.dim
    omega = 2.0 if n == 1 else 2.0 * math.pi
    xi = np.linspace(0.0, spec.xi_support, 20_001)
    integrand = xi ** (n - 1) * g_profile(spec, xi) ** spec.p
    dxi = xi[1] - xi[0]
    c1 = omega * float(dxi * (np.sum(integrand) - 0.5 * (integrand[0] + integrand[-1])))
    e = (n / 2.0 - spec.p) * spec.q / spec.p
    time_part = (spec.T + 1.0) ** (e + 1.0) / (e + 1.0)
    return c1 ** (spec.q / spec.p) * time_part


def _center_value(vals: np.ndarray) -> float:
    """Value at the exact domain center (mean of the straddling cells)."""
    if vals.ndim == 1:
        n = vals.shape[0]
        return float(vals[n // 2]) if n % 2 else 0.5 * float(vals[n // 2 - 1] + vals[n // 2])
    nx, ny = vals.shape
    ix = [nx // 2] if nx % 2 else [nx // 2 - 1, nx // 2]
    iy = [ny // 2] if ny % 2 else [ny // 2 - 1, ny // 2]
    return float(np.mean(vals[np.ix_(ix, iy)]))


def run_counterexample(spec: CounterexampleSpec, k_list: Sequence[int],
                       cfl_safety: float = 0.9,
                       check_stride: int = 8) -> CounterexampleReport:
    """Evolve each family member to T and collect the sharpness evidence:
    budget quadrature, center minimum, barrier domination, and the residual."""
    margin = verify_g_condition(spec)
    if margin < 0:
        raise ValueError(f"profile violates the supersolution condition: margin {margin}")
    grid = spec.grid
    dist = _dist_to_center(spec)
    mask = dist <= spec.R
    dist_masked = dist[mask]
    vol = grid.cellvol
    h2 = grid.h_min * grid.h_min
    rows = []
    sup_V0 = spec.initial_value()
    mass_V0 = sup_V0 * grid.volume
    if grid.dim == 1:
        zero_x = np.zeros(grid.cells[0] + 1)
        zero_y = None
    else:
        zero_x, zero_y = _zero_faces_2d(grid)
    for k in k_list:
        potential, V0, t_blow = build_counterexample(spec, k)
        V = V0.values.copy()
        t = 0.0
        budget = 0.0
        min_center = math.inf
        max_ratio = 0.0
        step_idx = 0
        g_max = spec.g_height
        while t < spec.T:
            b_vals = potential(t)
            b_neg = g_max / (t_blow - t)  # analytic sup of -b at this time
            dt = cfl_safety / (2.0 * grid.dim / h2 + b_neg)
            if t + dt >= spec.T:
                dt = spec.T - t
                next_t = spec.T
            else:
                next_t = t + dt
            norm_b = (np.sum(np.abs(b_vals) ** spec.p) * vol) ** (1.0 / spec.p)
            if grid.dim == 1:
                V, _, _, _ = kernels.step_linear_1d(
                    V, zero_x, b_vals, dt,
                    1.0 / grid.h[0] ** 2, 1.0 / grid.h[0],
                )
            else:
                V, _, _, _ = kernels.step_linear_2d(
                    V, zero_x, zero_y, b_vals, dt,
                    1.0 / grid.h[0] ** 2, 1.0 / grid.h[1] ** 2,
                    1.0 / grid.h[0], 1.0 / grid.h[1],
                )
            budget += dt * norm_b**spec.q
            t = next_t
            step_idx += 1
            min_center = min(min_center, _center_value(V))
            if step_idx % check_stride == 0 or t >= spec.T:
                tau = t_blow - t
                bar = tau**spec.alpha * (dist_masked * dist_masked / tau + 1.0)
                ratio = float(np.max(V[mask] / bar))
                max_ratio = max(max_ratio, ratio)
        rows.append(
            CounterexampleRow(
                k=k,
                gap=t_blow - spec.T,
                budget_integral=budget,
                min_V_at_x0=min_center,
                max_domination_ratio=max_ratio,
                min_supersolution_residual=residual_min(spec, k),
            )
        )
    L_declared = max(_budget_majorant(spec), sup_V0, 1.0 / mass_V0)
    return CounterexampleReport(spec=spec, rows=tuple(rows), L_declared=L_declared)


_ZERO_FACES_2D: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}


def _zero_faces_2d(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    key = grid.cells
    if key not in _ZERO_FACES_2D:
        nx, ny = grid.cells
        _ZERO_FACES_2D[key] = (np.zeros((nx + 1, ny)), np.zeros((nx, ny + 1)))
    return _ZERO_FACES_2D[key]


def write_counterexample_csv(report: CounterexampleReport, path: str | Path) -> None:
    lines = ["k,gap,budget_integral,min_V_at_x0,max_domination_ratio,min_supersolution_residual"]
    for r in report.rows:
        lines.append(
            f"{r.k},{r.gap!r},{r.budget_integral!r},{r.min_V_at_x0!r},"
            f"{r.max_domination_ratio!r},{r.min_supersolution_residual!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
