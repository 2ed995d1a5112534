"""Incompressible-limit solver: transport/growth splitting plus a
complementarity projection.

Each step advances the density by upwind transport and pointwise growth,
then solves the discrete linear complementarity problem

    p >= 0,  w = -lap_h p + (1 - rho*) / dt >= 0,  p * w = 0

by projected red-black SOR on the compact 2d+1 point Laplacian.  Where the
projection is active the new density equals one exactly, so in saturated
regions driven by the source the solved pressure satisfies
lap_h p + div b + f = 0 up to the sweep tolerance (the growth term put
rho* = 1 + dt (div b + f) there).  The growth rate is evaluated at the
previous step's pressure (Picard lag), which contracts when f_p <= 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteFieldError
from .grids import Field, Grid, l1_norm, mass
from .model import ModelSpec

EPS_RATE = 1e-14


@dataclass(frozen=True)
class PsorConfig:
    relaxation: float = 1.7
    tol_residual: float = 1e-8
    max_sweeps: int = 20000

    def __post_init__(self):
        if not 0.0 < self.relaxation < 2.0:
            raise ValueError("relaxation must lie in (0, 2)")


@dataclass(frozen=True)
class LimitState:
    rho: Field
    p: Field
    time: float
    converged: bool = True

    def complementarity_l1(self) -> float:
        return l1_norm(self.p.with_values(self.p.values * (1.0 - self.rho.values)))


@dataclass(frozen=True)
class LimitConfig:
    cfl_fraction: float = 0.4
    max_dt: float = math.inf
    save_times: tuple[float, ...] = ()
    avg_steps: int = 2
    # splitting accuracy: never step coarser than this fraction of the save
    # spacing, so the projection resolves the front motion between snapshots
    save_spacing_fraction: float = 0.25
    psor: PsorConfig = field(default_factory=PsorConfig)


@dataclass
class LimitTrajectory:
    spec: ModelSpec
    grid: Grid
    snapshots: list = field(default_factory=list)  # (time, LimitState, p_avg Field)
    mass_series: list = field(default_factory=list)
    psor_log: list = field(default_factory=list)  # (time, sweeps, residual)

    @property
    def times(self):
        return [t for t, _, _ in self.snapshots]

    def state_at(self, t: float) -> LimitState:
        for ts, st, _ in self.snapshots:
            if abs(ts - t) <= 1e-12 * max(1.0, abs(t)):
                return st
        raise KeyError(f"no snapshot at t={t}")

    def averaged_pressure_at(self, t: float) -> Field:
        for ts, _, pavg in self.snapshots:
            if abs(ts - t) <= 1e-12 * max(1.0, abs(t)):
                return pavg
        raise KeyError(f"no snapshot at t={t}")


class _LimitWorkspace:
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
        color = np.zeros(grid.shape, dtype=bool)
        idx = np.indices(grid.shape).sum(axis=0)
        color[idx % 2 == 0] = True
        self.red = color
        self.black = ~color

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

    def b_inf(self, t: float) -> float:
        return max((float(np.max(np.abs(bf))) for bf in self.b_faces(t) if bf.size), default=0.0)


def _neighbor_sum(p: np.ndarray) -> np.ndarray:
    s = np.zeros_like(p)
    for axis in range(p.ndim):
        left = [slice(None)] * p.ndim
        right = [slice(None)] * p.ndim
        left[axis] = slice(None, -1)
        right[axis] = slice(1, None)
        left, right = tuple(left), tuple(right)
        s[left] += p[right]
        s[right] += p[left]
    return s


def transport_growth_step(state: LimitState, spec: ModelSpec, dt: float,
                          ws: _LimitWorkspace | None = None) -> Field:
    """rho* = rho + dt [div(rho b) + rho f(x, t, p)]; may exceed one."""
    ws = ws if ws is not None else _LimitWorkspace(spec, state.rho.grid)
    g = ws.grid
    rho = state.rho.values
    t = state.time
    div = np.zeros_like(rho)
    for axis in range(g.dimension):
        left = [slice(None)] * g.dimension
        right = [slice(None)] * g.dimension
        left[axis] = slice(None, -1)
        right[axis] = slice(1, None)
        left, right = tuple(left), tuple(right)
        bf = ws.b_faces(t)[axis]
        if bf.any():
            flux = bf * np.where(bf > 0.0, rho[right], rho[left])
            div[left] += flux
            div[right] -= flux
    div /= g.dx
    f = np.asarray(spec.source.value(ws.coords, t, state.p.values))
    star = rho + dt * (div + rho * f)
    if not np.all(np.isfinite(star)):
        bad = np.argwhere(~np.isfinite(star))[0]
        raise NonFiniteFieldError(f"transport produced non-finite value at cell {tuple(int(k) for k in bad)}")
    return state.rho.with_values(np.maximum(star, 0.0), time_stamp=t + dt)


def complementarity_solve(rho_star: Field, spec: ModelSpec, t: float,
                          cfg: PsorConfig, dt: float,
                          p_start: Field | None = None,
                          ws: _LimitWorkspace | None = None) -> tuple[LimitState, int, float]:
    """Project rho* onto {rho <= 1} through the pressure LCP.

    Returns the state plus the sweep count and final residual
    max |min(p, -lap_h p + (1 - rho*)/dt)|.
    """
    ws = ws if ws is not None else _LimitWorkspace(spec, rho_star.grid)
    g = ws.grid
    dx2 = g.dx * g.dx
    two_d = 2.0 * g.dimension
    gvec = (1.0 - rho_star.values) / dt
    p = p_start.values.copy() if p_start is not None else np.zeros(g.shape)
    omega = cfg.relaxation

    sweeps = 0
    residual = math.inf
    if not np.any(rho_star.values > 1.0):
        p[:] = 0.0
        residual = 0.0
    else:
        for sweeps in range(1, cfg.max_sweeps + 1):
            for color in (ws.red, ws.black):
                s = _neighbor_sum(p)
                cand = (s - dx2 * gvec) / two_d
                upd = np.maximum(0.0, (1.0 - omega) * p + omega * cand)
                p[color] = upd[color]
            s = _neighbor_sum(p)
            w = (two_d * p - s) / dx2 + gvec
            residual = float(np.max(np.abs(np.minimum(p, w))))
            if residual <= cfg.tol_residual:
                break

    s = _neighbor_sum(p)
    lap_p = (s - two_d * p) / dx2
    rho_new = np.clip(rho_star.values + dt * lap_p, 0.0, 1.0)
    converged = residual <= cfg.tol_residual
    state = LimitState(
        rho=Field(g, rho_new, t),
        p=Field(g, p, t),
        time=t,
        converged=converged,
    )
    return state, sweeps, residual


def run_limit(spec: ModelSpec, grid: Grid, cfg: LimitConfig,
              rho0: Field | None = None) -> LimitTrajectory:
    """Alternate transport/growth and projection from t = 0 to the last save time."""
    if not spec.is_limit:
        raise ValueError("run_limit() expects the infinite-exponent spec")
    save_times = tuple(cfg.save_times) if cfg.save_times else (0.0, spec.horizon)
    t_final = save_times[-1]
    if t_final > spec.horizon + 1e-12:
        raise ValueError("save_times must stay within the horizon")

    ws = _LimitWorkspace(spec, grid)
    rho = rho0 if rho0 is not None else spec.init.limit_density(grid)
    if float(np.max(rho.values)) > 1.0 + 1e-12:
        raise ValueError("limit initial density must lie in [0, 1]")

    traj = LimitTrajectory(spec=spec, grid=grid)
    state = LimitState(rho=rho, p=Field.zeros(grid), time=0.0)

    spacings = [b - a for a, b in zip(save_times, save_times[1:]) if b > a]
    cadence_cap = cfg.save_spacing_fraction * min(spacings) if spacings \
        else cfg.save_spacing_fraction * spec.horizon

    def _dt_at(st: LimitState, t: float) -> float:
        f = np.asarray(spec.source.value(ws.coords, t, st.p.values))
        f_inf = float(np.max(np.abs(f)))
        dt = cfg.cfl_fraction * min(
            grid.dx / (ws.b_inf(t) + EPS_RATE),
            1.0 / (f_inf + EPS_RATE),
        )
        return min(dt, cadence_cap, cfg.max_dt)

    # pressure at t = 0 comes from one projection of the first growth step
    dt0 = _dt_at(state, 0.0)
    if t_final > 0.0:
        dt0 = min(dt0, t_final)
    star0 = transport_growth_step(state, spec, dt0, ws)
    probe, sweeps0, res0 = complementarity_solve(star0, spec, 0.0, cfg.psor, dt0, None, ws)
    state = LimitState(rho=rho, p=probe.p, time=0.0, converged=probe.converged)
    traj.psor_log.append((0.0, sweeps0, res0))

    traj.mass_series.append((0.0, mass(state.rho)))

    # snapshots awaiting the forward pressure average over the next avg_steps
    pending: list[list] = []

    def _push_snapshot(st: LimitState):
        pending.append([st, [st.p.values.copy()], 0])

    def _feed_pending(p_vals: np.ndarray):
        done = []
        for item in pending:
            item[1].append(p_vals.copy())
            item[2] += 1
            if item[2] >= cfg.avg_steps:
                done.append(item)
        for item in done:
            pending.remove(item)
            _finalize(item)

    def _finalize(item):
        st, stack, _ = item
        p_avg = Field(grid, np.mean(stack, axis=0), st.time)
        traj.snapshots.append((st.time, st, p_avg))

    t = 0.0
    next_save = 0
    while True:
        while next_save < len(save_times) and abs(save_times[next_save] - t) <= 1e-12 * max(1.0, t_final):
            _push_snapshot(LimitState(state.rho, state.p, save_times[next_save], state.converged))
            next_save += 1
        if next_save >= len(save_times) and not pending:
            break
        if next_save >= len(save_times) and t >= spec.horizon - 1e-15:
            break  # horizon exhausted; finalize partial averages below
        dt = _dt_at(state, t)
        dt = min(dt, max(spec.horizon - t, 1e-15))
        if next_save < len(save_times):
            t_next = save_times[next_save]
            if t + dt >= t_next - 1e-15:
                dt = t_next - t
                t_new = t_next
            else:
                t_new = t + dt
        else:
            t_new = t + dt
        star = transport_growth_step(state, spec, dt, ws)
        solved, sweeps, res = complementarity_solve(star, spec, t_new, cfg.psor, dt, state.p, ws)
        state = LimitState(rho=solved.rho, p=solved.p, time=t_new, converged=solved.converged)
        traj.psor_log.append((t_new, sweeps, res))
        traj.mass_series.append((t_new, mass(state.rho)))
        _feed_pending(state.p.values)
        t = t_new
    # average over whatever was collected if the horizon ended early
    for item in list(pending):
        pending.remove(item)
        _finalize(item)
    traj.snapshots.sort(key=lambda s: s[0])
    return traj
