"""Cell-centered fields on uniform box grids with reflecting (Neumann) walls.

All discrete calculus used by the solvers lives here: the conservative
self-adjoint Laplacian, face fluxes, gradients, and compensated quadrature.
Scalar unknowns sit at cell centers; fluxes and gradients sit on faces, with
the normal component pinned to zero on boundary faces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "make_grid",
    "make_field",
    "field_from_function",
    "zero_vector_field",
    "vector_field_from_face_arrays",
    "laplacian",
    "div_flux",
    "grad",
    "integrate",
    "lp_norm",
    "grad_cell_sq",
    "gradv4_over_v3",
    "value_at",
    "write_snapshot",
    "read_snapshot",
]


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on a box [0, L1] x ... in 1 or 2 dimensions."""

    dim: int
    lengths: tuple[float, ...]
    cells: tuple[int, ...]
    h: tuple[float, ...]

    @property
    def cellvol(self) -> float:
        return math.prod(self.h)

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    @property
    def h_min(self) -> float:
        return min(self.h)

    def axis_centers(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        n = self.cells[axis]
        return (np.arange(n) + 0.5) * self.h[axis]

    def axis_faces(self, axis: int) -> np.ndarray:
        """Face coordinates along one axis (n + 1 values including walls)."""
        n = self.cells[axis]
        return np.arange(n + 1) * self.h[axis]

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        axes = [self.axis_centers(k) for k in range(self.dim)]
        return tuple(np.meshgrid(*axes, indexing="ij"))


def make_grid(dim: int, lengths: Sequence[float], cells: Sequence[int]) -> Grid:
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    lengths = tuple(float(x) for x in lengths)
    cells = tuple(int(n) for n in cells)
    if len(lengths) != dim or len(cells) != dim:
        raise ValueError("lengths and cells must each have one entry per dimension")
    if any(x <= 0 for x in lengths):
        raise ValueError(f"side lengths must be positive, got {lengths}")
    if any(n < 2 for n in cells):
        raise ValueError(f"need at least 2 cells per axis, got {cells}")
    h = tuple(length / n for length, n in zip(lengths, cells))
    return Grid(dim=dim, lengths=lengths, cells=cells, h=h)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScalarField:
    """Immutable array of cell-center values tied to its grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.shape != self.grid.cells:
            raise ValueError(
                f"values shape {vals.shape} does not match grid cells {self.grid.cells}"
            )
        if vals is self.values and vals.flags.writeable:
            vals = vals.copy()
        object.__setattr__(self, "values", _freeze(vals))


def make_field(grid: Grid, values: np.ndarray | float) -> ScalarField:
    if np.isscalar(values):
        arr = np.full(grid.cells, float(values))
    else:
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != grid.cells:
            arr = arr.reshape(grid.cells)
    return ScalarField(grid, arr)


def field_from_function(grid: Grid, fn: Callable[..., np.ndarray]) -> ScalarField:
    """Evaluate fn at cell centers; fn takes one coordinate array per axis."""
    return ScalarField(grid, np.asarray(fn(*grid.meshgrid()), dtype=np.float64))


def _face_shape(grid: Grid, axis: int) -> tuple[int, ...]:
    shape = list(grid.cells)
    shape[axis] += 1
    return tuple(shape)


@dataclass(frozen=True)
class VectorField:
    """Face-centered vector field; normal component is zero on boundary faces.

    Component k holds one value per face orthogonal to axis k.  The boundary
    rows of each component must be exactly zero (no-flux walls); construction
    rejects anything else.
    """

    grid: Grid
    components: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.components) != self.grid.dim:
            raise ValueError("need one component per dimension")
        comps = []
        for axis, comp in enumerate(self.components):
            arr = np.ascontiguousarray(comp, dtype=np.float64)
            want = _face_shape(self.grid, axis)
            if arr.shape != want:
                raise ValueError(
                    f"component {axis} has shape {arr.shape}, expected {want}"
                )
            first = np.take(arr, 0, axis=axis)
            last = np.take(arr, -1, axis=axis)
            if np.any(first != 0.0) or np.any(last != 0.0):
                raise ValueError(
                    f"component {axis} must vanish on boundary faces (no-flux wall)"
                )
            if arr is comp and arr.flags.writeable:
                arr = arr.copy()
            comps.append(_freeze(arr))
        object.__setattr__(self, "components", tuple(comps))


def zero_vector_field(grid: Grid) -> VectorField:
    return VectorField(grid, tuple(np.zeros(_face_shape(grid, k)) for k in range(grid.dim)))


def vector_field_from_face_arrays(grid: Grid, *comps: np.ndarray) -> VectorField:
    """Wrap face arrays, forcing the boundary faces to exact zero."""
    fixed = []
    for axis, comp in enumerate(comps):
        arr = np.array(comp, dtype=np.float64)
        sl: list[slice | int] = [slice(None)] * grid.dim
        sl[axis] = 0
        arr[tuple(sl)] = 0.0
        sl[axis] = -1
        arr[tuple(sl)] = 0.0
        fixed.append(arr)
    return VectorField(grid, tuple(fixed))


def _reflect_second_diff(vals: np.ndarray, axis: int) -> np.ndarray:
    """Second difference along axis with mirrored ghost cells."""
    out = np.empty_like(vals)
    mid = [slice(None)] * vals.ndim
    lo = [slice(None)] * vals.ndim
    hi = [slice(None)] * vals.ndim
    mid[axis] = slice(1, -1)
    lo[axis] = slice(0, -2)
    hi[axis] = slice(2, None)
    out[tuple(mid)] = (
        vals[tuple(lo)] - 2.0 * vals[tuple(mid)] + vals[tuple(hi)]
    )
    first = [slice(None)] * vals.ndim
    second = [slice(None)] * vals.ndim
    first[axis] = 0
    second[axis] = 1
    out[tuple(first)] = vals[tuple(second)] - vals[tuple(first)]
    first[axis] = -1
    second[axis] = -2
    out[tuple(first)] = vals[tuple(second)] - vals[tuple(first)]
    return out


def laplacian(field: ScalarField) -> ScalarField:
    """Conservative five-point (three-point in 1D) Laplacian with Neumann walls.

    Self-adjoint in the cell-volume inner product, and its integral over the
    box vanishes to rounding; both are load-bearing for the flux identities
    downstream.
    """
    grid = field.grid
    out = np.zeros(grid.cells)
    for axis in range(grid.dim):
        out += _reflect_second_diff(field.values, axis) / grid.h[axis] ** 2
    return ScalarField(grid, out)


def grad(field: ScalarField) -> VectorField:
    """Face-centered gradient; reflection forces zero on boundary faces."""
    grid = field.grid
    comps = []
    for axis in range(grid.dim):
        comp = np.zeros(_face_shape(grid, axis))
        interior = [slice(None)] * grid.dim
        interior[axis] = slice(1, -1)
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        comp[tuple(interior)] = (
            field.values[tuple(hi)] - field.values[tuple(lo)]
        ) / grid.h[axis]
        comps.append(comp)
    return VectorField(grid, tuple(comps))


def div_flux(a: VectorField, field: ScalarField) -> ScalarField:
    """Divergence of the product flux a*F with arithmetic face averages.

    Telescopes exactly: the no-flux walls make the integral of the result
    vanish to rounding.
    """
    grid = field.grid
    if a.grid != grid:
        raise ValueError("vector field and scalar field live on different grids")
    out = np.zeros(grid.cells)
    for axis in range(grid.dim):
        comp = a.components[axis]
        first = np.take(comp, 0, axis=axis)
        last = np.take(comp, -1, axis=axis)
        if np.any(first != 0.0) or np.any(last != 0.0):
            raise ValueError("flux field lost its no-flux boundary tag")
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        face_avg = 0.5 * (field.values[tuple(lo)] + field.values[tuple(hi)])
        interior = [slice(None)] * grid.dim
        interior[axis] = slice(1, -1)
        flux = np.zeros(_face_shape(grid, axis))
        flux[tuple(interior)] = comp[tuple(interior)] * face_avg
        out += (flux[tuple(hi)] - flux[tuple(lo)]) / grid.h[axis]
    return ScalarField(grid, out)


def integrate(field: ScalarField) -> float:
    """Box integral by exact compensated summation times the cell volume."""
    return math.fsum(field.values.ravel()) * field.grid.cellvol


def lp_norm(field: ScalarField, p: float) -> float:
    if p == math.inf:
        return float(np.max(np.abs(field.values)))
    if p < 1:
        raise ValueError(f"lp_norm needs p >= 1 or inf, got {p}")
    total = math.fsum(np.abs(field.values.ravel()) ** p)
    return (total * field.grid.cellvol) ** (1.0 / p)


def grad_cell_sq(field: ScalarField) -> np.ndarray:
    """Squared gradient magnitude at cell centers.

    Per axis the two adjacent face gradients are averaged, which reduces to
    the classic centered difference in the interior and to the reflected
    (half-slope) value in wall cells.
    """
    grid = field.grid
    out = np.zeros(grid.cells)
    gv = grad(field)
    for axis in range(grid.dim):
        comp = gv.components[axis]
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        cell = 0.5 * (comp[tuple(lo)] + comp[tuple(hi)])
        out += cell * cell
    return out


def gradv4_over_v3(field: ScalarField, floor: float) -> float:
    """Integral of |grad v|^4 / (v + floor)^3 with a zero-gradient guard."""
    g2 = grad_cell_sq(field)
    den = field.values + floor
    # staged ratio: den**3 underflows to zero for tiny signals
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = g2 / den
        integrand = np.where(g2 == 0.0, 0.0, ratio * ratio / den)
    return math.fsum(integrand.ravel()) * field.grid.cellvol


def value_at(field: ScalarField, point: Sequence[float]) -> float:
    """Multilinear interpolation of cell-center values at a point."""
    grid = field.grid
    vals = field.values
    idx = []
    wts = []
    for axis in range(grid.dim):
        h = grid.h[axis]
        n = grid.cells[axis]
        s = point[axis] / h - 0.5
        i0 = int(math.floor(s))
        frac = s - i0
        # clamp each index on its own so points beyond the outermost cell
        # centers get the constant extension, not a neighbor blend
        i1 = min(max(i0 + 1, 0), n - 1)
        i0 = min(max(i0, 0), n - 1)
        idx.append((i0, i1))
        wts.append((1.0 - frac, frac))
    if grid.dim == 1:
        (i0, i1), (w0, w1) = idx[0], wts[0]
        return float(w0 * vals[i0] + w1 * vals[i1])
    (i0, i1), (j0, j1) = idx
    (wx0, wx1), (wy0, wy1) = wts
    return float(
        wx0 * (wy0 * vals[i0, j0] + wy1 * vals[i0, j1])
        + wx1 * (wy0 * vals[i1, j0] + wy1 * vals[i1, j1])
    )


def write_snapshot(field: ScalarField, time: float, path: str | Path) -> None:
    """Write 'dim nx [ny] hx [hy] time' then one value per line, row-major."""
    grid = field.grid
    head = [str(grid.dim), *(str(n) for n in grid.cells)]
    head += [repr(h) for h in grid.h] + [repr(float(time))]
    lines = [" ".join(head)]
    lines.extend(repr(float(x)) for x in field.values.ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path: str | Path) -> tuple[ScalarField, float]:
    text = Path(path).read_text().split()
    dim = int(text[0])
    if dim not in (1, 2):
        raise ValueError(f"snapshot dim must be 1 or 2, got {dim}")
    cells = tuple(int(x) for x in text[1 : 1 + dim])
    h = tuple(float(x) for x in text[1 + dim : 1 + 2 * dim])
    time = float(text[1 + 2 * dim])
    body = np.array([float(x) for x in text[2 + 2 * dim :]])
    if body.size != math.prod(cells):
        raise ValueError("snapshot body does not match declared cell counts")
    lengths = tuple(n * hx for n, hx in zip(cells, h))
    grid = make_grid(dim, lengths, cells)
    return ScalarField(grid, body.reshape(cells)), time
