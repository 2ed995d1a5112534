"""Uniform Cartesian grids, scalar/vector fields, masks, and discrete operators.

Conventions used everywhere in the package:

* cells are squares (cubes) of side ``dx``, cell centers at
  ``origin + (i + 1/2) * dx`` per axis, arrays indexed ``values[i]`` in 1D
  and ``values[i, j]`` in 2D with axis 0 <-> x0, axis 1 <-> x1;
* everything outside the domain is a zero ghost cell.  Solutions are kept
  compactly supported inside a safety margin, so the ghost convention never
  touches live data;
* ``gradient`` and ``divergence`` are centered differences with zero ghosts,
  which makes them exact negative adjoints under the discrete inner product;
* ``laplacian`` is defined as ``divergence(gradient(u))`` so the composition
  identity holds to round-off.  On interior cells this is the 2d+1 point
  stencil ``(u[i+2] - 2 u[i] + u[i-2]) / (2 dx)^2`` per axis: second order
  and exact on quadratics.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, NonFiniteFieldError

MIN_CELLS = 16


@dataclass(frozen=True)
class Grid:
    """Uniform square grid over an axis-aligned box."""

    dimension: int
    cells_per_axis: int
    dx: float
    origin: tuple[float, ...]

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.cells_per_axis < MIN_CELLS:
            raise ValueError(f"cells_per_axis must be >= {MIN_CELLS}")
        if not (self.dx > 0.0 and np.isfinite(self.dx)):
            raise ValueError(f"dx must be positive and finite, got {self.dx}")
        if len(self.origin) != self.dimension:
            raise ValueError("origin length must match dimension")

    @classmethod
    def from_domain(cls, dimension: int, cells_per_axis: int, lo: float, hi: float) -> "Grid":
        """Grid over the box [lo, hi]^dimension (single dx on all axes)."""
        if not hi > lo:
            raise ValueError("domain must have positive volume")
        dx = (hi - lo) / cells_per_axis
        return cls(dimension, cells_per_axis, dx, (lo,) * dimension)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_axis,) * self.dimension

    @property
    def cell_count(self) -> int:
        return self.cells_per_axis**self.dimension

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dimension

    @property
    def extent(self) -> float:
        return self.cells_per_axis * self.dx

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.cells_per_axis) + 0.5) * self.dx

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinate arrays, one per axis, each of ``self.shape``."""
        axes = [self.axis_centers(k) for k in range(self.dimension)]
        if self.dimension == 1:
            return (axes[0],)
        return tuple(np.meshgrid(axes[0], axes[1], indexing="ij"))

    def points(self) -> np.ndarray:
        """All cell centers as an (N, d) array in row-major cell order."""
        return np.stack([c.ravel() for c in self.meshgrid()], axis=-1)

    def index_of(self, x: np.ndarray) -> np.ndarray:
        """Cell index containing each point; points are clipped to the grid."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx = np.floor((x - np.asarray(self.origin)) / self.dx).astype(np.int64)
        return np.clip(idx, 0, self.cells_per_axis - 1)


@dataclass(frozen=True)
class Field:
    """Scalar field sampled at cell centers."""

    grid: Grid
    values: np.ndarray
    time_stamp: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise GridMismatchError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "values", v)

    def check_finite(self, label: str = "field"):
        if not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise NonFiniteFieldError(f"{label} non-finite at cell {tuple(int(k) for k in bad)}")

    def with_values(self, values: np.ndarray, time_stamp: float | None = None) -> "Field":
        t = self.time_stamp if time_stamp is None else time_stamp
        return Field(self.grid, values, t)

    @classmethod
    def zeros(cls, grid: Grid, time_stamp: float = 0.0) -> "Field":
        return cls(grid, np.zeros(grid.shape), time_stamp)

    @classmethod
    def from_function(cls, grid: Grid, fn, time_stamp: float = 0.0) -> "Field":
        """Sample ``fn(*coords)`` at cell centers."""
        return cls(grid, np.asarray(fn(*grid.meshgrid()), dtype=float), time_stamp)


@dataclass(frozen=True)
class VectorField:
    """One scalar component per axis, all on the same grid."""

    grid: Grid
    components: tuple[np.ndarray, ...]
    time_stamp: float = 0.0

    def __post_init__(self):
        comps = tuple(np.asarray(c, dtype=np.float64) for c in self.components)
        if len(comps) != self.grid.dimension:
            raise GridMismatchError("one component per axis required")
        for c in comps:
            if c.shape != self.grid.shape:
                raise GridMismatchError("component shape mismatch")
        object.__setattr__(self, "components", comps)


@dataclass(frozen=True)
class Mask:
    """Boolean cell set on a grid."""

    grid: Grid
    bits: np.ndarray
    time_stamp: float = 0.0

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.shape != self.grid.shape:
            raise GridMismatchError(f"bits shape {b.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "bits", b)

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return not bool(self.bits.any())


def same_grid(*objs):
    g = objs[0].grid
    for o in objs[1:]:
        if o.grid != g:
            raise GridMismatchError("operands live on different grids")
    return g


# ---------------------------------------------------------------------------
# differential operators (zero ghost cells)
# ---------------------------------------------------------------------------

def _centered_diff(a: np.ndarray, axis: int, dx: float) -> np.ndarray:
    """(a[i+1] - a[i-1]) / (2 dx) with zero ghosts along ``axis``."""
    out = np.zeros_like(a)
    upper = [slice(None)] * a.ndim
    lower = [slice(None)] * a.ndim
    mid = [slice(None)] * a.ndim
    upper[axis] = slice(2, None)
    lower[axis] = slice(None, -2)
    mid[axis] = slice(1, -1)
    out[tuple(mid)] = a[tuple(upper)] - a[tuple(lower)]
    first = [slice(None)] * a.ndim
    first[axis] = 0
    second = [slice(None)] * a.ndim
    second[axis] = 1
    out[tuple(first)] = a[tuple(second)]
    last = [slice(None)] * a.ndim
    last[axis] = -1
    penult = [slice(None)] * a.ndim
    penult[axis] = -2
    out[tuple(last)] = -a[tuple(penult)]
    out /= 2.0 * dx
    return out


def gradient(u: Field) -> VectorField:
    """Centered-difference gradient, one component per axis."""
    comps = tuple(_centered_diff(u.values, k, u.grid.dx) for k in range(u.grid.dimension))
    return VectorField(u.grid, comps, u.time_stamp)


def divergence(F: VectorField) -> Field:
    """Centered-difference divergence; exact negative adjoint of gradient."""
    out = np.zeros(F.grid.shape)
    for k, c in enumerate(F.components):
        out += _centered_diff(c, k, F.grid.dx)
    return Field(F.grid, out, F.time_stamp)


def laplacian(u: Field) -> Field:
    """Discrete Laplacian, defined as divergence(gradient(u)).

    On interior cells (two or more cells from the boundary) this equals the
    per-axis stencil (u[i+2] - 2 u[i] + u[i-2]) / (2 dx)^2.
    """
    return divergence(gradient(u))


def inner(u: Field, v: Field) -> float:
    """Discrete L2 inner product: cell sum times cell volume."""
    g = same_grid(u, v)
    return float(np.sum(u.values * v.values) * g.cell_volume)


def vector_inner(F: VectorField, G: VectorField) -> float:
    g = same_grid(F, G)
    s = 0.0
    for a, b in zip(F.components, G.components):
        s += float(np.sum(a * b))
    return s * g.cell_volume


# ---------------------------------------------------------------------------
# norms and integrals
# ---------------------------------------------------------------------------

def mass(u: Field) -> float:
    return float(np.sum(u.values) * u.grid.cell_volume)


def l1_norm(u: Field) -> float:
    return float(np.sum(np.abs(u.values)) * u.grid.cell_volume)


def linf_norm(u: Field) -> float:
    return float(np.max(np.abs(u.values))) if u.values.size else 0.0


def l1_distance(u: Field, v: Field) -> float:
    same_grid(u, v)
    return float(np.sum(np.abs(u.values - v.values)) * u.grid.cell_volume)


# ---------------------------------------------------------------------------
# snapshot serialization: one JSON header line + raw little-endian float64
# ---------------------------------------------------------------------------

def write_snapshot(path, u: Field, name: str):
    header = {
        "d": u.grid.dimension,
        "cells_per_axis": u.grid.cells_per_axis,
        "dx": u.grid.dx,
        "origin": list(u.grid.origin),
        "time_stamp": u.time_stamp,
        "name": name,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())


def read_snapshot(path) -> tuple[Field, str]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    grid = Grid(header["d"], header["cells_per_axis"], header["dx"], tuple(header["origin"]))
    values = np.frombuffer(raw, dtype="<f8").reshape(grid.shape).astype(np.float64)
    return Field(grid, values, header["time_stamp"]), header["name"]


def write_mask_rle(path, m: Mask):
    """Run-length encoded mask: alternating false/true run lengths, false first."""
    flat = m.bits.ravel()
    runs = []
    current = False
    count = 0
    for v in flat:
        if bool(v) == current:
            count += 1
        else:
            runs.append(count)
            current = bool(v)
            count = 1
    runs.append(count)
    doc = {
        "d": m.grid.dimension,
        "cells_per_axis": m.grid.cells_per_axis,
        "dx": m.grid.dx,
        "origin": list(m.grid.origin),
        "time_stamp": m.time_stamp,
        "rle": runs,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


def read_mask_rle(path) -> Mask:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    grid = Grid(doc["d"], doc["cells_per_axis"], doc["dx"], tuple(doc["origin"]))
    flat = np.zeros(grid.cell_count, dtype=bool)
    pos = 0
    value = False
    for run in doc["rle"]:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    if pos != grid.cell_count:
        raise ValueError(f"RLE length {pos} != cell count {grid.cell_count}")
    return Mask(grid, flat.reshape(grid.shape), doc["time_stamp"])
