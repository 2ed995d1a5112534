"""Explicit conservative solver for the compressible model.

The update integrates d rho / dt = div(rho grad p + rho b) + rho f with a
forward Euler step on face fluxes:

* diffusive face flux: arithmetic-mean face density times the two-point
  pressure gradient across the face (exactly conservative by telescoping);
* advective face flux: donor-cell upwind with respect to the transport
  velocity -b (the face value is the right cell when the face drift b > 0);
* source: pointwise Euler on rho * f(x, t, p).

Boundary faces carry zero flux; the run aborts if the support ever reaches
the safety margin, so the zero-ghost convention never clips live mass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MarginViolationError, NonFiniteFieldError
from .grids import Field, Grid
from .model import (
    AssumptionReport,
    ModelSpec,
    audit_assumptions,
    pressure_from_density,
    theoretical_support_radius,
)

EPS_RATE = 1e-14
# upwind advection leaks a geometrically decaying positive tail one cell per
# step, so support checks use a tiny absolute floor instead of strict > 0
SUPPORT_FLOOR = 1e-10


@dataclass(frozen=True)
class SolveConfig:
    cfl_fraction: float = 0.4
    max_dt: float = math.inf
    save_times: tuple[float, ...] = ()
    positivity_floor: float = 0.0
    margin_cells: int = 4
    check_theoretical_radius: bool = True

    def __post_init__(self):
        if not 0.0 < self.cfl_fraction <= 1.0:
            raise ValueError("cfl_fraction must lie in (0, 1]")
        if sorted(self.save_times) != list(self.save_times):
            raise ValueError("save_times must be sorted")


@dataclass
class Trajectory:
    spec: ModelSpec
    grid: Grid
    snapshots: list = field(default_factory=list)  # (time, rho Field, p Field)
    mass_series: list = field(default_factory=list)  # (time, mass)
    step_log: list = field(default_factory=list)  # dt per step
    clamped_mass: float = 0.0
    min_before_clamp: float = 0.0

    @property
    def times(self) -> list[float]:
        return [t for t, _, _ in self.snapshots]

    def density_at(self, t: float) -> Field:
        for ts, rho, _ in self.snapshots:
            if abs(ts - t) <= 1e-12 * max(1.0, abs(t)):
                return rho
        raise KeyError(f"no snapshot at t={t}")

    def pressure_at(self, t: float) -> Field:
        for ts, _, p in self.snapshots:
            if abs(ts - t) <= 1e-12 * max(1.0, abs(t)):
                return p
        raise KeyError(f"no snapshot at t={t}")


class _Workspace:
    """Cached geometry and coefficient samples for one (spec, grid) pair."""

    def __init__(self, spec: ModelSpec, grid: Grid):
        self.spec = spec
        self.grid = grid
        self.coords = grid.meshgrid()
        self.face_coords = [self._face_coords(axis) for axis in range(grid.dimension)]
        self.b_faces_cache = None
        if spec.drift.time_independent:
            self.b_faces_cache = [
                np.asarray(spec.drift.components(self.face_coords[axis], 0.0)[axis])
                for axis in range(grid.dimension)
            ]
        self.f_cache = None
        probe = (np.zeros(1),) * grid.dimension
        if (
            spec.source.time_independent
            and spec.source.p_only
            and float(np.max(np.abs(spec.source.dp(probe, 0.0, 0.0)))) == 0.0
        ):
            self.f_cache = np.asarray(spec.source.value(self.coords, 0.0, 0.0))
        self.b_inf_cache = None
        if spec.drift.time_independent:
            self.b_inf_cache = max(
                (float(np.max(np.abs(bf))) for bf in self.b_faces_cache if bf.size),
                default=0.0,
            )

    def _face_coords(self, axis: int):
        g = self.grid
        axes = []
        for k in range(g.dimension):
            if k == axis:
                axes.append(g.origin[k] + (np.arange(g.cells_per_axis - 1) + 1.0) * g.dx)
            else:
                axes.append(g.axis_centers(k))
        if g.dimension == 1:
            return (axes[0],)
        X0, X1 = np.meshgrid(axes[0], axes[1], indexing="ij")
        return (X0, X1)

    def b_faces(self, t: float):
        if self.b_faces_cache is not None:
            return self.b_faces_cache
        return [
            np.asarray(self.spec.drift.components(self.face_coords[axis], t)[axis])
            for axis in range(self.grid.dimension)
        ]

    def f_values(self, t: float, p: np.ndarray):
        if self.f_cache is not None:
            return self.f_cache
        return np.asarray(self.spec.source.value(self.coords, t, p))

    def b_inf(self, t: float) -> float:
        if self.b_inf_cache is not None:
            return self.b_inf_cache
        return max((float(np.max(np.abs(bf))) for bf in self.b_faces(t) if bf.size), default=0.0)


def _rhs_and_rates(ws: _Workspace, rho: np.ndarray, t: float):
    """One pass: flux divergence + growth, plus the stability rates."""
    spec, g = ws.spec, ws.grid
    m = spec.m
    p = m / (m - 1.0) * rho ** (m - 1.0)
    div = np.zeros_like(rho)
    b_faces = ws.b_faces(t)
    for axis in range(g.dimension):
        left = [slice(None)] * g.dimension
        right = [slice(None)] * g.dimension
        left[axis] = slice(None, -1)
        right[axis] = slice(1, None)
        left, right = tuple(left), tuple(right)
        rho_l, rho_r = rho[left], rho[right]
        flux = 0.5 * (rho_l + rho_r) * (p[right] - p[left])
        flux /= g.dx
        bf = b_faces[axis]
        if bf.any():
            flux += bf * np.where(bf > 0.0, rho_r, rho_l)
        div[left] += flux
        div[right] -= flux
    div /= g.dx
    f = ws.f_values(t, p)
    rhs = div + rho * f
    d_max = (m - 1.0) * float(np.max(p))
    f_inf = float(np.max(np.abs(f)))
    return rhs, d_max, f_inf


def _dt_from_rates(ws: _Workspace, d_max: float, f_inf: float, t: float, cfg: SolveConfig) -> float:
    g = ws.grid
    dt = cfg.cfl_fraction * min(
        g.dx**2 / (2.0 * g.dimension * (d_max + EPS_RATE)),
        g.dx / (ws.b_inf(t) + EPS_RATE),
        1.0 / (f_inf + EPS_RATE),
    )
    return min(dt, cfg.max_dt)


def stable_dt(rho: Field, spec: ModelSpec, t: float, cfg: SolveConfig = SolveConfig()) -> float:
    """CFL bound combining diffusion rate (m-1) p, drift speed, and growth."""
    ws = _Workspace(spec, rho.grid)
    _, d_max, f_inf = _rhs_and_rates(ws, rho.values, t)
    return _dt_from_rates(ws, d_max, f_inf, t, cfg)


def step(rho: Field, spec: ModelSpec, t: float, dt: float,
         cfg: SolveConfig = SolveConfig()) -> Field:
    """One forward Euler step; clamps undershoots at the positivity floor."""
    ws = _Workspace(spec, rho.grid)
    rhs, _, _ = _rhs_and_rates(ws, rho.values, t)
    new_vals, _, _ = _apply_update(ws, rho.values, rhs, t, dt, cfg)
    return rho.with_values(new_vals, time_stamp=t + dt)


def _apply_update(ws: _Workspace, rho: np.ndarray, rhs: np.ndarray, t: float,
                  dt: float, cfg: SolveConfig):
    new = rho + dt * rhs
    pre_min = float(np.min(new))
    clamped = 0.0
    if pre_min < cfg.positivity_floor:
        lifted = np.maximum(new, cfg.positivity_floor)
        clamped = float(np.sum(lifted - new)) * ws.grid.cell_volume
        new = lifted
    if not np.all(np.isfinite(new)):
        bad = np.argwhere(~np.isfinite(new))[0]
        raise NonFiniteFieldError(
            f"non-finite density at t={t + dt:.6g}, cell {tuple(int(k) for k in bad)}"
        )
    return new, pre_min, clamped


def _margin_slabs(shape, margin: int):
    slabs = []
    for axis in range(len(shape)):
        lo = [slice(None)] * len(shape)
        hi = [slice(None)] * len(shape)
        lo[axis] = slice(None, margin)
        hi[axis] = slice(-margin, None)
        slabs.append(tuple(lo))
        slabs.append(tuple(hi))
    return slabs


def run(spec: ModelSpec, grid: Grid, cfg: SolveConfig,
        rho0: Field | None = None, audit: AssumptionReport | None = None) -> Trajectory:
    """Integrate from t = 0 to the last save time, hitting save times exactly."""
    if spec.is_limit:
        raise ValueError("run() integrates finite exponents; use the limit solver")
    save_times = tuple(cfg.save_times) if cfg.save_times else (0.0, spec.horizon)
    t_final = save_times[-1]
    if t_final > spec.horizon + 1e-12:
        raise ValueError("save_times must stay within the horizon")

    rho = rho0 if rho0 is not None else spec.initial_density(grid)
    ws = _Workspace(spec, grid)
    margin = cfg.margin_cells

    rep = audit if audit is not None else audit_assumptions(spec)
    if cfg.check_theoretical_radius:
        half = min(spec.domain_hi, -spec.domain_lo)
        r_env = theoretical_support_radius(spec, t_final, grid, rep)
        if r_env > half - margin * grid.dx:
            raise MarginViolationError(
                f"support envelope R({t_final:.3g}) = {r_env:.3g} exceeds the domain "
                f"minus the {margin}-cell margin; enlarge the domain"
            )

    traj = Trajectory(spec=spec, grid=grid, snapshots=[], mass_series=[], step_log=[])
    traj.min_before_clamp = 0.0
    slabs = _margin_slabs(grid.shape, margin)

    t = 0.0
    vals = rho.values.copy()
    traj.mass_series.append((t, float(np.sum(vals)) * grid.cell_volume))
    next_save = 0

    def _snapshot(time, values):
        rho_f = Field(grid, values.copy(), time)
        p_f = pressure_from_density(rho_f, spec.m)
        traj.snapshots.append((time, rho_f, p_f))

    while True:
        while next_save < len(save_times) and abs(save_times[next_save] - t) <= 1e-12 * max(1.0, t_final):
            _snapshot(save_times[next_save], vals)
            next_save += 1
        if next_save >= len(save_times):
            break
        rhs, d_max, f_inf = _rhs_and_rates(ws, vals, t)
        dt = _dt_from_rates(ws, d_max, f_inf, t, cfg)
        t_next = save_times[next_save]
        hit = False
        if t + dt >= t_next - 1e-15:
            dt = t_next - t
            hit = True
        vals, pre_min, clamped = _apply_update(ws, vals, rhs, t, dt, cfg)
        traj.min_before_clamp = min(traj.min_before_clamp, pre_min)
        traj.clamped_mass += clamped
        traj.step_log.append(dt)
        t = t_next if hit else t + dt
        traj.mass_series.append((t, float(np.sum(vals)) * grid.cell_volume))
        for slab in slabs:
            if np.any(vals[slab] > SUPPORT_FLOOR):
                raise MarginViolationError(
                    f"support reached the {margin}-cell margin at t={t:.6g}; enlarge the domain"
                )
    return traj
