"""Signal-dependent motility laws and their two-sided linear envelopes.

The degenerate kinds vanish at zero signal (phi(0) = 0, phi'(0) > 0,
phi > 0 beyond), which is what shuts diffusion down where the signal has
been consumed.  The shifted kind adds a positive floor and serves as the
nondegenerate control in the pattern experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = [
    "MotilitySpec",
    "linear",
    "exp_decay",
    "saturating",
    "shifted",
    "tabulated",
    "load_tabulated",
    "write_tabulated",
    "phi_eval",
    "phi_prime",
    "phi_max_on_range",
    "envelope_constants",
]

_BUILTIN_KINDS = ("linear", "exp_decay", "saturating", "shifted", "tabulated")


@dataclass(frozen=True, eq=False)
class MotilitySpec:
    kind: str
    beta: float = 1.0
    shift: float = 0.0
    base: Optional["MotilitySpec"] = None
    table_v: Optional[np.ndarray] = field(default=None, repr=False)
    table_phi: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in _BUILTIN_KINDS:
            raise ValueError(f"unknown motility kind {self.kind!r}")
        if self.kind == "exp_decay" and self.beta <= 0:
            raise ValueError("exp_decay needs beta > 0")
        if self.kind == "shifted":
            if self.base is None or self.base.kind == "shifted":
                raise ValueError("shifted needs a degenerate base spec")
            if self.shift <= 0:
                raise ValueError("shifted needs shift > 0")
        if self.kind == "tabulated":
            v = np.ascontiguousarray(self.table_v, dtype=np.float64)
            p = np.ascontiguousarray(self.table_phi, dtype=np.float64)
            if v.ndim != 1 or v.shape != p.shape or v.size < 3:
                raise ValueError("tabulated needs matching 1d samples, at least 3")
            if v[0] != 0.0 or p[0] != 0.0:
                raise ValueError("tabulated samples must start at v = 0 with phi = 0")
            if np.any(np.diff(v) <= 0):
                raise ValueError("tabulated v samples must be strictly increasing")
            if np.any(p[1:] <= 0.0):
                raise ValueError("tabulated phi must be positive past v = 0")
            object.__setattr__(self, "table_v", v)
            object.__setattr__(self, "table_phi", p)
            object.__setattr__(self, "_pchip", PchipInterpolator(v, p, extrapolate=False))
            object.__setattr__(self, "_pchip_d", self._pchip.derivative())

    @property
    def degenerate(self) -> bool:
        return self.kind != "shifted"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MotilitySpec):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.beta == other.beta
            and self.shift == other.shift
            and self.base == other.base
            and np.array_equal(self.table_v, other.table_v)
            and np.array_equal(self.table_phi, other.table_phi)
        )

    def __hash__(self) -> int:
        # tables enter by a cheap content summary so equal specs hash equal
        table_key = None
        if self.table_v is not None:
            table_key = (self.table_v.size, float(self.table_v[-1]),
                         float(self.table_phi[-1]))
        return hash((self.kind, self.beta, self.shift, self.base, table_key))


def linear() -> MotilitySpec:
    return MotilitySpec("linear")


def exp_decay(beta: float) -> MotilitySpec:
    return MotilitySpec("exp_decay", beta=float(beta))


def saturating() -> MotilitySpec:
    return MotilitySpec("saturating")


def shifted(shift: float, base: MotilitySpec | None = None) -> MotilitySpec:
    return MotilitySpec("shifted", shift=float(shift), base=base or linear())


def tabulated(v: np.ndarray, phi: np.ndarray) -> MotilitySpec:
    return MotilitySpec("tabulated", table_v=np.asarray(v), table_phi=np.asarray(phi))


def load_tabulated(path: str | Path) -> MotilitySpec:
    """Read a 'v phi' two-column plain-text table."""
    rows = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{ln}: expected two columns, got {len(parts)}")
        rows.append((float(parts[0]), float(parts[1])))
    if not rows:
        raise ValueError(f"{path}: empty motility table")
    arr = np.array(rows)
    return tabulated(arr[:, 0], arr[:, 1])


def write_tabulated(spec: MotilitySpec, path: str | Path) -> None:
    if spec.kind != "tabulated":
        raise ValueError("only tabulated specs have a sample file form")
    lines = [f"{repr(float(v))} {repr(float(p))}"
             for v, p in zip(spec.table_v, spec.table_phi)]
    Path(path).write_text("\n".join(lines) + "\n")


def _check_nonneg(v: np.ndarray) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if np.any(arr < 0.0):
        raise ValueError("motility is only defined for v >= 0")
    return arr


def phi_eval(spec: MotilitySpec, v: np.ndarray | float) -> np.ndarray | float:
    scalar = np.isscalar(v)
    arr = _check_nonneg(v)
    if spec.kind == "linear":
        out = arr.copy() if not scalar else arr
    elif spec.kind == "exp_decay":
        out = arr * np.exp(-spec.beta * arr)
    elif spec.kind == "saturating":
        out = arr / (1.0 + arr)
    elif spec.kind == "shifted":
        out = phi_eval(spec.base, arr) + spec.shift
    else:
        vmax = spec.table_v[-1]
        clipped = np.minimum(arr, vmax)
        out = spec._pchip(clipped)  # constant extension past the table
    return float(out) if scalar else np.asarray(out)


def phi_prime(spec: MotilitySpec, v: np.ndarray | float) -> np.ndarray | float:
    scalar = np.isscalar(v)
    arr = _check_nonneg(v)
    if spec.kind == "linear":
        out = np.ones_like(arr)
    elif spec.kind == "exp_decay":
        out = np.exp(-spec.beta * arr) * (1.0 - spec.beta * arr)
    elif spec.kind == "saturating":
        out = 1.0 / (1.0 + arr) ** 2
    elif spec.kind == "shifted":
        out = phi_prime(spec.base, arr)
    else:
        vmax = spec.table_v[-1]
        out = np.where(arr >= vmax, 0.0, spec._pchip_d(np.minimum(arr, vmax)))
    return float(out) if scalar else np.asarray(out)


def phi_max_on_range(spec: MotilitySpec, vmin: float, vmax: float) -> float:
    """Exact sup of phi over [vmin, vmax] for the closed-form kinds."""
    if vmax < vmin:
        raise ValueError("empty range")
    if spec.kind == "linear":
        return vmax
    if spec.kind == "saturating":
        return vmax / (1.0 + vmax)
    if spec.kind == "exp_decay":
        peak = min(max(1.0 / spec.beta, vmin), vmax)  # unimodal with mode 1/beta
        return float(phi_eval(spec, peak))
    if spec.kind == "shifted":
        return phi_max_on_range(spec.base, vmin, vmax) + spec.shift
    xs = np.linspace(vmin, vmax, 4097)
    return float(np.max(phi_eval(spec, xs)))


_SAMPLES = 1_000_000


def envelope_constants(spec: MotilitySpec, K: float) -> tuple[float, float]:
    """Sampled envelope slopes (lo, hi) with lo*v <= phi(v) <= hi*v on [0, K].

    lo is the infimum of phi(v)/v (extended by phi'(0) at zero), hi the
    supremum of |phi'|.  Dense sampling at 1e6 points plus a refinement pass
    around the located extremum; endpoints are always included exactly.
    Only meaningful for degenerate kinds, where phi(0) = 0 makes the ratio
    bound equivalent to a two-sided linear envelope.
    """
    if not spec.degenerate:
        raise ValueError("envelope constants require a degenerate motility")
    if K <= 0:
        raise ValueError("envelope constants need K > 0")
    xs = np.linspace(0.0, K, _SAMPLES + 1)
    d0 = float(phi_prime(spec, 0.0))
    ratio = np.empty_like(xs)
    ratio[0] = d0
    ratio[1:] = phi_eval(spec, xs[1:]) / xs[1:]
    slope = np.abs(phi_prime(spec, xs))

    def refine(vals: np.ndarray, idx: int, reducer) -> float:
        lo = xs[max(idx - 2, 0)]
        hi = xs[min(idx + 2, xs.size - 1)]
        fine = np.linspace(lo, hi, 10_001)
        if reducer is np.min:
            with np.errstate(invalid="ignore", divide="ignore"):
                f = np.where(fine > 0, phi_eval(spec, fine) / np.where(fine > 0, fine, 1.0), d0)
        else:
            f = np.abs(phi_prime(spec, fine))
        return float(reducer(np.append(f, vals[idx])))

    lam = refine(ratio, int(np.argmin(ratio)), np.min)
    Lam = refine(slope, int(np.argmax(slope)), np.max)
    lam = min(lam, float(np.min(ratio)))
    Lam = max(Lam, float(np.max(slope)))
    if lam <= 0.0:
        raise ValueError(f"motility ratio floor is not positive on (0, {K}]")
    return lam, Lam
