"""Positivity-preserving explicit solver for the taxis-consumption system

    u_t = lap(u * (eps + phi(v))),   v_t = lap v - u v

on a box with no-flux walls.  The cross-diffusion term is stepped as the
plain Laplacian of the product field w = u * (eps + phi(v)), which keeps the
update a nonnegative combination of old values whenever the time step sits
under the CFL threshold; eps = 0 (fully degenerate motility) is allowed.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .diagnostics import DiagnosticsRecord, diagnostics_step
from .fields import Grid, ScalarField, integrate, lp_norm
from .motility import MotilitySpec

__all__ = [
    "SimParams",
    "SolverState",
    "Trajectory",
    "ConvergenceReport",
    "SolverInvariantError",
    "initial_state",
    "cfl_timestep",
    "step",
    "simulate",
    "epsilon_sweep",
]

MASS_RTOL = 1e-10
POS_SLACK = 1e-14
BLOWUP_FACTOR = 1e3
GRADV4_FLOOR_REL = 1e-12


@dataclass(frozen=True)
class SimParams:
    t_end: float
    eps: float = 0.0
    cfl_safety: float = 0.9
    diag_stride: int = 100

    def __post_init__(self) -> None:
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.diag_stride < 1:
            raise ValueError("diag_stride must be >= 1")


@dataclass(frozen=True)
class SolverState:
    """Fields at one time plus the running consumption integrals.

    Invariants held between steps: u >= 0, 0 <= v <= max_v0 (1e-14 slack),
    the u mass stays within 1e-10 of its initial value, and the cumulative
    integrals are nondecreasing.
    """

    t: float
    u: ScalarField
    v: ScalarField
    cumulative_uv: float
    cumulative_u2v: float
    cumulative_gradv4: float
    mass_u0: float
    max_u0: float
    max_v0: float

    @property
    def grid(self) -> Grid:
        return self.u.grid


class SolverInvariantError(RuntimeError):
    """A step broke positivity, comparison, or conservation; carries a state dump."""

    def __init__(self, message: str, dump: dict):
        detail = ", ".join(f"{k}={v!r}" for k, v in dump.items())
        super().__init__(f"{message} [{detail}]")
        self.dump = dump


def initial_state(u0: ScalarField, v0: ScalarField) -> SolverState:
    if u0.grid != v0.grid:
        raise ValueError("u0 and v0 must share a grid")
    if np.any(u0.values < 0.0) or np.any(v0.values < 0.0):
        raise ValueError("initial data must be nonnegative")
    return SolverState(
        t=0.0,
        u=u0,
        v=v0,
        cumulative_uv=0.0,
        cumulative_u2v=0.0,
        cumulative_gradv4=0.0,
        mass_u0=integrate(u0),
        max_u0=float(np.max(u0.values)),
        max_v0=float(np.max(v0.values)),
    )


def _phi_parts(spec: MotilitySpec, v_arr: np.ndarray, max_v: float):
    """Split phi(v) = base(v) + shift for the kernel; returns
    (base array, shift, max of base over the field)."""
    inner, c = (spec.base, spec.shift) if spec.kind == "shifted" else (spec, 0.0)
    if inner.kind == "linear":
        return v_arr, c, max_v
    if inner.kind == "exp_decay":
        arr = v_arr * np.exp(-inner.beta * v_arr)
        return arr, c, float(arr.max())
    if inner.kind == "saturating":
        arr = v_arr / (1.0 + v_arr)
        return arr, c, float(arr.max())
    vt = inner.table_v[-1]
    arr = np.asarray(inner._pchip(np.clip(v_arr, 0.0, vt)))
    return arr, c, float(arr.max())


def _cfl_value(grid: Grid, safety: float, eps: float, phi_field_max: float,
               u_max: float) -> float:
    """Both factors are exactly the positivity thresholds of the two stencils."""
    h2 = grid.h_min * grid.h_min
    diffusivity = eps + phi_field_max
    t_u = math.inf if diffusivity == 0.0 else h2 / (2.0 * grid.dim * diffusivity)
    t_v = 1.0 / (2.0 * grid.dim / h2 + u_max)
    return safety * min(t_u, t_v)


def _fused_phi(spec: MotilitySpec):
    """(code, beta, shift) when phi is one of the closed forms the chunk
    kernels evaluate inline; None sends tabulated motilities down the
    per-step path."""
    inner, c = (spec.base, spec.shift) if spec.kind == "shifted" else (spec, 0.0)
    if inner.kind == "linear":
        return 0, 0.0, c
    if inner.kind == "exp_decay":
        return 1, inner.beta, c
    if inner.kind == "saturating":
        return 2, 0.0, c
    return None


_CHUNK_ERRORS = {
    2: "u went negative (CFL or stencil bug)",
    3: "v went negative (CFL or stencil bug)",
    4: "v exceeded its initial sup",
    5: "u mass drifted past 1e-10",
}


def cfl_timestep(state: SolverState, params: SimParams, spec: MotilitySpec) -> float:
    u_max = float(np.max(state.u.values))
    max_v = float(np.max(state.v.values))
    _, c, base_max = _phi_parts(spec, state.v.values, max_v)
    diffusivity = params.eps + c + base_max
    if diffusivity == 0.0:
        if u_max == 0.0:
            raise SolverInvariantError(
                "state is totally inert: no diffusion at all would act",
                {"t": state.t, "max_u": u_max, "max_v": max_v},
            )
        warnings.warn(
            "motility flux is fully degenerate (phi(v) = 0 everywhere); "
            "u is frozen until v reappears",
            RuntimeWarning,
            stacklevel=2,
        )
    return _cfl_value(state.grid, params.cfl_safety, params.eps, c + base_max, u_max)


def _checked_advance(grid: Grid, spec: MotilitySpec, eps: float, floor: float,
                     u_arr, v_arr, max_v, dt, mass_u0, max_u0, max_v0, t):
    """Run one kernel step and enforce the state invariants; returns arrays,
    stats, and the per-step integral increments (without dt)."""
    phiv, c, _ = _phi_parts(spec, v_arr, max_v)
    if grid.dim == 1:
        out = kernels.step_coupled_1d(
            u_arr, v_arr, phiv, c, eps, dt,
            1.0 / grid.h[0] ** 2, 1.0 / grid.h[0], floor,
        )
    else:
        out = kernels.step_coupled_2d(
            u_arr, v_arr, phiv, c, eps, dt,
            1.0 / grid.h[0] ** 2, 1.0 / grid.h[1] ** 2,
            1.0 / grid.h[0], 1.0 / grid.h[1], floor,
        )
    u_new, v_new, su, sv, suv, su2v, sg4, min_u, max_u, min_v, max_v_new = out
    vol = grid.cellvol
    tol_u = POS_SLACK * max(1.0, max_u0)
    tol_v = POS_SLACK * max(1.0, max_v0)
    dump = {
        "t": t, "dt": dt, "min_u": min_u, "max_u": max_u,
        "min_v": min_v, "max_v": max_v_new, "mass_u": su * vol,
    }
    if min_u < -tol_u:
        raise SolverInvariantError("u went negative (CFL or stencil bug)", dump)
    if min_v < -tol_v:
        raise SolverInvariantError("v went negative (CFL or stencil bug)", dump)
    if max_v_new > max_v0 + tol_v:
        raise SolverInvariantError("v exceeded its initial sup", dump)
    if abs(su * vol - mass_u0) > MASS_RTOL * mass_u0 + 1e-300:
        raise SolverInvariantError("u mass drifted past 1e-10", dump)
    return u_new, v_new, (suv * vol, su2v * vol, sg4 * vol), max_u, max_v_new


def step(state: SolverState, params: SimParams, spec: MotilitySpec,
         dt: float) -> SolverState:
    """One explicit step of size dt; dt must respect cfl_timestep."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    admissible = cfl_timestep(state, params, spec)
    if dt > admissible * (1.0 + 1e-9):
        raise ValueError(f"dt {dt} exceeds the CFL bound {admissible}")
    floor = GRADV4_FLOOR_REL * state.max_v0
    max_v = float(np.max(state.v.values))
    u_new, v_new, (duv, du2v, dg4), _, _ = _checked_advance(
        state.grid, spec, params.eps, floor,
        state.u.values, state.v.values, max_v, dt,
        state.mass_u0, state.max_u0, state.max_v0, state.t,
    )
    return dataclasses.replace(
        state,
        t=state.t + dt,
        u=ScalarField(state.grid, u_new),
        v=ScalarField(state.grid, v_new),
        cumulative_uv=state.cumulative_uv + dt * duv,
        cumulative_u2v=state.cumulative_u2v + dt * du2v,
        cumulative_gradv4=state.cumulative_gradv4 + dt * dg4,
    )


@dataclass
class Trajectory:
    grid: Grid
    spec: MotilitySpec
    params: SimParams
    records: list[DiagnosticsRecord]
    snapshots: list[SolverState]
    final: SolverState
    steps: int
    blowup: bool


def simulate(u0: ScalarField, v0: ScalarField, spec: MotilitySpec,
             params: SimParams, snapshot_times: tuple[float, ...] = ()) -> Trajectory:
    """Advance to t_end with the adaptive CFL step.

    Snapshots are taken at exactly the requested times (the step is clipped
    to land on them), so the running integrals stored in each snapshot line
    up with the steps in between; the total-variation certificates depend on
    that alignment.
    """
    state0 = initial_state(u0, v0)
    if state0.mass_u0 <= 0.0:
        raise ValueError("u0 must carry positive mass")
    if state0.max_v0 == 0.0:
        warnings.warn(
            "v0 is identically zero: with a degenerate motility u stays frozen",
            RuntimeWarning,
            stacklevel=2,
        )
    grid = u0.grid
    events = sorted(set(float(t) for t in snapshot_times))
    if any(t <= 0 or t > params.t_end for t in events):
        raise ValueError("snapshot times must lie in (0, t_end]")
    events.append(params.t_end)

    floor = GRADV4_FLOOR_REL * state0.max_v0
    u_arr = state0.u.values
    v_arr = state0.v.values
    t = 0.0
    cum_uv = 0.0
    cum_u2v = 0.0
    cum_g4 = 0.0
    max_u_seen = state0.max_u0
    max_v = state0.max_v0
    u_max = state0.max_u0
    blowup = False
    n_steps = 0
    last_dt = 0.0

    def materialize() -> SolverState:
        return SolverState(
            t=t,
            u=ScalarField(grid, u_arr),
            v=ScalarField(grid, v_arr),
            cumulative_uv=cum_uv,
            cumulative_u2v=cum_u2v,
            cumulative_gradv4=cum_g4,
            mass_u0=state0.mass_u0,
            max_u0=state0.max_u0,
            max_v0=state0.max_v0,
        )

    records = [diagnostics_step(state0, 0.0)]
    snapshots = [state0]
    event_idx = 0
    warned_frozen = False
    fused = _fused_phi(spec)

    def note_blowup() -> None:
        nonlocal blowup
        if not blowup and max_u_seen > BLOWUP_FACTOR * max(state0.max_u0, 1e-300):
            blowup = True
            warnings.warn(
                f"sup u grew past {BLOWUP_FACTOR:g} times its initial value",
                RuntimeWarning,
                stacklevel=3,
            )

    if fused is not None:
        # Chunked fast path: the kernel advances diag_stride steps (or up to
        # the next snapshot time) per call with the same arithmetic as the
        # per-step loop below, so both paths produce identical trajectories.
        code, beta, c = fused
        acc = np.zeros(12)
        acc[3] = max_u_seen
        acc[4] = u_max
        acc[5] = max_v
        h2 = grid.h_min * grid.h_min
        tol_u = POS_SLACK * max(1.0, state0.max_u0)
        tol_v = POS_SLACK * max(1.0, state0.max_v0)
        mass_tol = MASS_RTOL * state0.mass_u0 + 1e-300
        while t < params.t_end:
            target = events[event_idx]
            budget = params.diag_stride - (n_steps % params.diag_stride)
            if grid.dim == 1:
                out = kernels.run_chunk_1d(
                    u_arr, v_arr, code, beta, c, params.eps, params.cfl_safety,
                    t, target, budget, h2, 1.0 / grid.h[0] ** 2, 1.0 / grid.h[0],
                    grid.cellvol, floor, state0.mass_u0, state0.max_v0,
                    tol_u, tol_v, mass_tol, acc,
                )
            else:
                out = kernels.run_chunk_2d(
                    u_arr, v_arr, code, beta, c, params.eps, params.cfl_safety,
                    t, target, budget, h2,
                    1.0 / grid.h[0] ** 2, 1.0 / grid.h[1] ** 2,
                    1.0 / grid.h[0], 1.0 / grid.h[1],
                    grid.cellvol, floor, state0.mass_u0, state0.max_v0,
                    tol_u, tol_v, mass_tol, acc,
                )
            u_new, v_new, status, done, t_new, last_dt = out
            n_steps += int(done)
            cum_uv = float(acc[0])
            cum_u2v = float(acc[1])
            cum_g4 = float(acc[2])
            max_u_seen = float(acc[3])
            if acc[6] != 0.0 and not warned_frozen:
                warnings.warn(
                    "motility flux is fully degenerate; u is frozen",
                    RuntimeWarning,
                    stacklevel=2,
                )
                warned_frozen = True
            if status >= 2:
                raise SolverInvariantError(_CHUNK_ERRORS[int(status)], {
                    "t": t_new, "dt": last_dt,
                    "min_u": float(acc[7]), "max_u": float(acc[8]),
                    "min_v": float(acc[9]), "max_v": float(acc[10]),
                    "mass_u": float(acc[11]),
                })
            u_arr = u_new
            v_arr = v_new
            t = t_new
            note_blowup()
            if status == 0:
                snapshots.append(materialize())
                event_idx += 1
            if (n_steps % params.diag_stride == 0 or t >= params.t_end) and records[-1].t != t:
                records.append(diagnostics_step(materialize(), last_dt))

    while fused is None and t < params.t_end:
        _, c, base_max = _phi_parts(spec, v_arr, max_v)
        diffusivity = params.eps + c + base_max
        if diffusivity == 0.0 and not warned_frozen and u_max > 0.0:
            warnings.warn(
                "motility flux is fully degenerate; u is frozen",
                RuntimeWarning,
                stacklevel=2,
            )
            warned_frozen = True
        dt = _cfl_value(grid, params.cfl_safety, params.eps, c + base_max, u_max)
        target = events[event_idx]
        hit_event = False
        if t + dt >= target:
            dt = target - t
            hit_event = True
        u_arr, v_arr, (duv, du2v, dg4), u_max, max_v = _checked_advance(
            grid, spec, params.eps, floor, u_arr, v_arr, max_v, dt,
            state0.mass_u0, state0.max_u0, state0.max_v0, t,
        )
        cum_uv += dt * duv
        cum_u2v += dt * du2v
        cum_g4 += dt * dg4
        t = target if hit_event else t + dt
        n_steps += 1
        last_dt = dt
        if u_max > max_u_seen:
            max_u_seen = u_max
            note_blowup()
        if hit_event:
            snapshots.append(materialize())
            event_idx += 1
        if (n_steps % params.diag_stride == 0 or t >= params.t_end) and records[-1].t != t:
            records.append(diagnostics_step(materialize(), last_dt))

    final = snapshots[-1]
    return Trajectory(
        grid=grid, spec=spec, params=params, records=records,
        snapshots=snapshots, final=final, steps=n_steps, blowup=blowup,
    )


@dataclass(frozen=True)
class ConvergenceReport:
    eps_values: tuple[float, ...]
    u_l1_distances: tuple[float, ...]
    v_linf_distances: tuple[float, ...]
    final_u: tuple[ScalarField, ...]
    final_v: tuple[ScalarField, ...]


def epsilon_sweep(u0: ScalarField, v0: ScalarField, spec: MotilitySpec,
                  params: SimParams, eps_list) -> ConvergenceReport:
    """Rerun the same problem over a decreasing regularization list and report
    successive distances of the final fields."""
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(e <= 0 for e in eps_list):
        raise ValueError("eps_list must contain positive values")
    if any(b > a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be nonincreasing")
    finals_u = []
    finals_v = []
    for eps in eps_list:
        traj = simulate(u0, v0, spec, dataclasses.replace(params, eps=eps))
        finals_u.append(traj.final.u)
        finals_v.append(traj.final.v)
    du = tuple(
        lp_norm(ScalarField(u0.grid, a.values - b.values), 1.0)
        for a, b in zip(finals_u, finals_u[1:])
    )
    dv = tuple(
        lp_norm(ScalarField(u0.grid, a.values - b.values), math.inf)
        for a, b in zip(finals_v, finals_v[1:])
    )
    return ConvergenceReport(
        eps_values=tuple(eps_list),
        u_l1_distances=du,
        v_linf_distances=dv,
        final_u=tuple(finals_u),
        final_v=tuple(finals_v),
    )
