"""Streamlines of -b, set flow maps, support and frontier extraction,
distance transforms, Hausdorff distances, and ball-window convolutions.

All set geometry works at cell-center resolution: distance transforms are
exact Euclidean for the cell-center metric, morphological balls are the
sets of cells whose center lies within the radius, and rasterized flow maps
carry an explicit one-cell dilation so inclusion checks can budget it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import EmptyMaskError
from .forcing import Drift
from .grids import Field, Grid, Mask, linf_norm, same_grid
from .model import ModelSpec


# ---------------------------------------------------------------------------
# streamlines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StreamlineTrace:
    x0: tuple[float, ...]
    t0: float
    s_values: np.ndarray
    points: np.ndarray  # (n, d), points[k] = X(x0, t0; s_values[k])
    step: float
    truncated: bool = False

    def at(self, s: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.s_values - s)))
        return self.points[k]


def _drift_speed_bound(drift: Drift, grid: Grid, t: float) -> float:
    lo = grid.origin[0] - 0.5 * grid.extent
    hi = grid.origin[0] + 1.5 * grid.extent
    ax = np.linspace(lo, hi, 17)
    coords = (ax,) if grid.dimension == 1 else np.meshgrid(ax, ax, indexing="ij")
    comps = drift.components(coords, t)
    return float(np.max(np.sqrt(sum(np.asarray(c) ** 2 for c in comps))))


def _rk4_push(points: np.ndarray, t0: float, s: float, drift: Drift, h: float) -> np.ndarray:
    """Advance X' = -b(X, t0 + s) for all points over signed duration s."""
    pts = np.atleast_2d(np.asarray(points, dtype=float)).copy()
    if s == 0.0 or drift.is_zero:
        return pts
    n_steps = max(1, int(math.ceil(abs(s) / h)))
    dt = s / n_steps
    tau = 0.0
    for _ in range(n_steps):
        k1 = -drift.at_points(pts, t0 + tau)
        k2 = -drift.at_points(pts + 0.5 * dt * k1, t0 + tau + 0.5 * dt)
        k3 = -drift.at_points(pts + 0.5 * dt * k2, t0 + tau + 0.5 * dt)
        k4 = -drift.at_points(pts + dt * k3, t0 + tau + dt)
        pts += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tau += dt
    return pts


def _streamline_step(spec: ModelSpec, grid: Grid, t0: float) -> float:
    speed = _drift_speed_bound(spec.drift, grid, t0)
    if speed <= 0.0:
        return 0.005 * spec.horizon
    return min(grid.dx / speed, 0.01 * spec.horizon) / 2.0


def integrate_streamline(x0, t0: float, s_range: tuple[float, float],
                         spec: ModelSpec, grid: Grid) -> StreamlineTrace:
    """Classical RK4 trace of X' = -b(X, t0 + s) over [s_lo, s_hi] containing 0."""
    s_lo, s_hi = float(s_range[0]), float(s_range[1])
    if s_lo > 0.0 or s_hi < 0.0:
        raise ValueError("s_range must contain 0")
    h = _streamline_step(spec, grid, t0)
    x0 = np.asarray(x0, dtype=float).reshape(1, -1)

    def _march(total: float):
        if total == 0.0:
            return [0.0], [x0[0].copy()]
        n = max(1, int(math.ceil(abs(total) / h)))
        dt = total / n
        svals, pts = [], []
        cur = x0.copy()
        s = 0.0
        for _ in range(n):
            cur = _rk4_push(cur, t0 + s, dt, spec.drift, abs(dt) + 1e-300)
            s += dt
            svals.append(s)
            pts.append(cur[0].copy())
        return svals, pts

    s_back, p_back = _march(s_lo)
    s_fwd, p_fwd = _march(s_hi)
    s_all = list(reversed(s_back)) + [0.0] + s_fwd
    p_all = list(reversed(p_back)) + [x0[0].copy()] + p_fwd
    # drop the duplicated zero that _march(0.0) emits
    s_arr = np.asarray(s_all)
    p_arr = np.asarray(p_all)
    keep = np.ones(len(s_arr), dtype=bool)
    for k in range(1, len(s_arr)):
        if s_arr[k] == s_arr[k - 1]:
            keep[k] = False
    s_arr, p_arr = s_arr[keep], p_arr[keep]

    lo = np.asarray(grid.origin) - 0.5 * grid.extent
    hi = np.asarray(grid.origin) + 1.5 * grid.extent
    outside = np.any((p_arr < lo) | (p_arr > hi), axis=1)
    truncated = bool(outside.any())
    if truncated:
        first_out = int(np.argmax(outside))
        inside_zero = int(np.argmin(np.abs(s_arr)))
        if first_out > inside_zero:
            s_arr, p_arr = s_arr[:first_out], p_arr[:first_out]
        else:
            s_arr, p_arr = s_arr[first_out + 1 :], p_arr[first_out + 1 :]
    return StreamlineTrace(tuple(np.ravel(x0)), t0, s_arr, p_arr, h, truncated)


def flow_map_set(mask: Mask, t0: float, s: float, spec: ModelSpec) -> Mask:
    """Push every cell center of the mask along its streamline and rasterize.

    The result is dilated by one cell to cover rasterization gaps.
    """
    g = mask.grid
    if mask.is_empty():
        return mask
    pts = g.points()[mask.bits.ravel()]
    h = _streamline_step(spec, g, t0)
    moved = _rk4_push(pts, t0, s, spec.drift, h)
    bits = np.zeros(g.shape, dtype=bool)
    idx = g.index_of(moved)
    bits[tuple(idx.T)] = True
    return dilate(Mask(g, bits, mask.time_stamp), g.dx)


# ---------------------------------------------------------------------------
# support / frontier extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrontierRecord:
    time: float
    support: Mask
    boundary: Mask
    dist_to_support: Field
    dist_to_complement: Field
    threshold: float


def _cross(d: int) -> np.ndarray:
    return ndimage.generate_binary_structure(d, 1)


def extract_frontier(p: Field, threshold: float | None = None) -> FrontierRecord:
    """Threshold the field and build the two-sided cell-interface band.

    Support is {p > threshold}; the boundary band collects support cells
    with a non-support face neighbor plus non-support cells with a support
    face neighbor.  Distance transforms are exact Euclidean for cell
    centers, in physical length units.
    """
    g = p.grid
    if threshold is None:
        threshold = max(1e-10, 1e-6 * linf_norm(p))
    if threshold < 0.0:
        raise ValueError("threshold must be non-negative")
    supp = p.values > threshold
    support = Mask(g, supp, p.time_stamp)
    if not supp.any():
        inf_field = Field(g, np.full(g.shape, math.inf), p.time_stamp)
        zero = Field(g, np.zeros(g.shape), p.time_stamp)
        empty = Mask(g, np.zeros(g.shape, bool), p.time_stamp)
        return FrontierRecord(p.time_stamp, support, empty, inf_field, zero, threshold)
    cross = _cross(g.dimension)
    inner = supp & ~ndimage.binary_erosion(supp, structure=cross, border_value=0)
    outer = ~supp & ndimage.binary_dilation(supp, structure=cross, border_value=0)
    boundary = Mask(g, inner | outer, p.time_stamp)
    dist_to_support = ndimage.distance_transform_edt(~supp, sampling=g.dx)
    dist_to_complement = ndimage.distance_transform_edt(supp, sampling=g.dx)
    return FrontierRecord(
        p.time_stamp,
        support,
        boundary,
        Field(g, dist_to_support, p.time_stamp),
        Field(g, dist_to_complement, p.time_stamp),
        threshold,
    )


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def distance_to_mask(m: Mask) -> Field:
    """Exact Euclidean distance from every cell center to the mask (inf if empty)."""
    if m.is_empty():
        return Field(m.grid, np.full(m.grid.shape, math.inf), m.time_stamp)
    d = ndimage.distance_transform_edt(~m.bits, sampling=m.grid.dx)
    return Field(m.grid, d, m.time_stamp)


def hausdorff_distance(a: Mask, b: Mask) -> float:
    """max(sup_{x in a} d(x, b), sup_{y in b} d(y, a)), cell-center exact."""
    same_grid(a, b)
    if a.is_empty() or b.is_empty():
        side = "first" if a.is_empty() else "second"
        if a.is_empty() and b.is_empty():
            side = "both"
        raise EmptyMaskError(f"hausdorff_distance: {side} mask empty")
    d_to_b = distance_to_mask(b).values
    d_to_a = distance_to_mask(a).values
    return float(max(d_to_b[a.bits].max(), d_to_a[b.bits].max()))


def directed_set_distance(a: Mask, b: Mask) -> float:
    """sup_{x in a} d(x, b)."""
    same_grid(a, b)
    if a.is_empty() or b.is_empty():
        raise EmptyMaskError("directed_set_distance needs non-empty masks")
    return float(distance_to_mask(b).values[a.bits].max())


@dataclass(frozen=True)
class SpacetimeDistance:
    value: float
    skipped_times_a: tuple[float, ...]
    skipped_times_b: tuple[float, ...]


def spacetime_frontier_distance(A: list[FrontierRecord], B: list[FrontierRecord],
                                time_weight: float = 1.0) -> SpacetimeDistance:
    """Hausdorff distance between the clouds {(x, w t) : x in boundary(t)}.

    Records with an empty frontier are skipped and reported.
    """

    def _cloud(records):
        pts, skipped = [], []
        for rec in records:
            if rec.boundary.is_empty():
                skipped.append(rec.time)
                continue
            g = rec.boundary.grid
            xy = g.points()[rec.boundary.bits.ravel()]
            tcol = np.full((xy.shape[0], 1), time_weight * rec.time)
            pts.append(np.hstack([xy, tcol]))
        if not pts:
            raise EmptyMaskError("space-time cloud is empty")
        return np.vstack(pts), tuple(skipped)

    cloud_a, skip_a = _cloud(A)
    cloud_b, skip_b = _cloud(B)
    tree_a = cKDTree(cloud_a)
    tree_b = cKDTree(cloud_b)
    d_ab = tree_b.query(cloud_a, k=1)[0].max()
    d_ba = tree_a.query(cloud_b, k=1)[0].max()
    return SpacetimeDistance(float(max(d_ab, d_ba)), skip_a, skip_b)


# ---------------------------------------------------------------------------
# morphology and ball convolutions
# ---------------------------------------------------------------------------

def _ball_footprint(grid: Grid, r: float) -> np.ndarray:
    k = int(math.floor(r / grid.dx + 1e-9))
    offsets = np.arange(-k, k + 1)
    if grid.dimension == 1:
        return np.abs(offsets) * grid.dx <= r + 1e-9 * grid.dx
    oi, oj = np.meshgrid(offsets, offsets, indexing="ij")
    return np.sqrt(oi**2 + oj**2) * grid.dx <= r + 1e-9 * grid.dx


def dilate(mask: Mask, r: float) -> Mask:
    """Euclidean-ball dilation: cells within distance r of the mask."""
    if r < 0.0:
        raise ValueError("radius must be non-negative")
    if r == 0.0 or mask.is_empty():
        return mask
    d = ndimage.distance_transform_edt(~mask.bits, sampling=mask.grid.dx)
    return Mask(mask.grid, d <= r + 1e-9 * mask.grid.dx, mask.time_stamp)


def erode(mask: Mask, r: float) -> Mask:
    """Euclidean-ball erosion: cells farther than r from the complement."""
    if r < 0.0:
        raise ValueError("radius must be non-negative")
    if r == 0.0 or mask.is_empty():
        return mask
    d = ndimage.distance_transform_edt(mask.bits, sampling=mask.grid.dx)
    return Mask(mask.grid, d > r + 1e-9 * mask.grid.dx, mask.time_stamp)


def sup_convolve(u: Field, r: float) -> Field:
    """Running max over the Euclidean ball of radius r (zero outside the box)."""
    if r < 0.0:
        raise ValueError("radius must be non-negative")
    if r < u.grid.dx:
        return u
    fp = _ball_footprint(u.grid, r)
    out = ndimage.maximum_filter(u.values, footprint=fp, mode="constant", cval=0.0)
    return u.with_values(out)


def inf_convolve(u: Field, r: float) -> Field:
    """Running min over the Euclidean ball; equals -sup_convolve(-u, r) exactly."""
    if r < 0.0:
        raise ValueError("radius must be non-negative")
    if r < u.grid.dx:
        return u
    fp = _ball_footprint(u.grid, r)
    out = ndimage.minimum_filter(u.values, footprint=fp, mode="constant", cval=0.0)
    return u.with_values(out)


# ---------------------------------------------------------------------------
# modified sup/inf convolutions with time dilation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvolutionParams:
    r0: float
    L: float
    alpha: float
    tau0: float

    def __post_init__(self):
        if not 0.0 <= self.alpha < 0.5:
            raise ValueError("alpha must lie in [0, 1/2)")
        if self.r0 < 0.0 or self.L < 0.0 or self.tau0 <= 0.0:
            raise ValueError("r0, L must be non-negative and tau0 positive")

    def radius(self, t: float) -> float:
        return self.r0 * math.exp(-self.L * t)


def interpolate_density(traj, t: float) -> Field:
    """Linear-in-time interpolation between trajectory snapshots."""
    times = traj.times
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise ValueError(f"time {t} outside trajectory range [{times[0]}, {times[-1]}]")
    t = min(max(t, times[0]), times[-1])
    hi = int(np.searchsorted(np.asarray(times), t))
    if hi == 0:
        return traj.snapshots[0][1]
    if abs(times[hi - 1] - t) <= 1e-14:
        return traj.snapshots[hi - 1][1]
    if hi >= len(times):
        return traj.snapshots[-1][1]
    t0, t1 = times[hi - 1], times[hi]
    w = (t - t0) / (t1 - t0)
    v = (1.0 - w) * traj.snapshots[hi - 1][1].values + w * traj.snapshots[hi][1].values
    return Field(traj.grid, v, t)


def modified_convolutions(traj, params: ConvolutionParams,
                          times: list[float] | None = None) -> tuple[list[Field], list[Field]]:
    """Deflated sup-convolution and inflated inf-convolution sequences.

    u1(x, t) = (1 - a)^(1/(m-1)) sup over B(x, r(t)) of rho(y, (1 - a) t),
    u2(x, t) = (1 + a)^(1/(m-1)) inf over B(x, r(t)) of rho(y, (1 + a) t),
    with r(t) = r0 exp(-L t); density values between snapshots are linear
    interpolants in time.
    """
    m = traj.spec.m
    if not (np.isfinite(m) and m > 1.0):
        raise ValueError("modified convolutions need a finite exponent")
    a = params.alpha
    horizon_needed = (1.0 + a) * params.tau0
    if traj.times[-1] < horizon_needed - 1e-12:
        raise ValueError(
            f"trajectory ends at {traj.times[-1]:.6g}, needs {horizon_needed:.6g}"
        )
    if times is None:
        times = [t for t in traj.times if t <= params.tau0 + 1e-12]
    lo_scale = (1.0 - a) ** (1.0 / (m - 1.0))
    hi_scale = (1.0 + a) ** (1.0 / (m - 1.0))
    u1_seq, u2_seq = [], []
    for t in times:
        r = params.radius(t)
        rho_lo = interpolate_density(traj, (1.0 - a) * t)
        rho_hi = interpolate_density(traj, (1.0 + a) * t)
        u1 = sup_convolve(rho_lo, r).values * lo_scale
        u2 = inf_convolve(rho_hi, r).values * hi_scale
        u1_seq.append(Field(traj.grid, u1, t))
        u2_seq.append(Field(traj.grid, u2, t))
    return u1_seq, u2_seq


# ---------------------------------------------------------------------------
# point sampling
# ---------------------------------------------------------------------------

def sample_field_at_points(u: Field, pts: np.ndarray) -> np.ndarray:
    """Multilinear interpolation at arbitrary points, zero outside the box."""
    g = u.grid
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    rel = (pts - np.asarray(g.origin)) / g.dx - 0.5
    lo = np.floor(rel).astype(np.int64)
    w = rel - lo
    n = g.cells_per_axis

    def _value_at(idx):
        inside = np.all((idx >= 0) & (idx < n), axis=1)
        vals = np.zeros(len(idx))
        if inside.any():
            ii = idx[inside]
            vals[inside] = u.values[tuple(ii.T)]
        return vals

    if g.dimension == 1:
        v0 = _value_at(lo)
        v1 = _value_at(lo + 1)
        return v0 * (1 - w[:, 0]) + v1 * w[:, 0]
    out = np.zeros(len(pts))
    for di in (0, 1):
        for dj in (0, 1):
            corner = lo + np.array([di, dj])
            weight = (w[:, 0] if di else 1 - w[:, 0]) * (w[:, 1] if dj else 1 - w[:, 1])
            out += weight * _value_at(corner)
    return out
