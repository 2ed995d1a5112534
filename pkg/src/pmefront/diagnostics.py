"""Quantitative probes tying trajectories to the free-boundary theory:

* interior floor margins for lap p + div b + f (with the 1/t term and the
  improved time-uniform floor when the initial semi-convexity check holds);
* near-front average-pressure scaling and the void/growth dichotomy;
* strict-expansion exponents along backward streamlines plus the sqrt(s)
  forward speed cap;
* exponent-sweep convergence tables: space-time L1 pressure gaps, support
  Hausdorff distances, containment margins, space-time frontier distances;
* disjoint-ball covering counts and dimension fits for the frontier;
* ball-oscillation integrals and their propagation constant.

Support conventions: for finite exponents the support is extracted from the
density at a 5 percent relative threshold (the pressure of a steep profile
drops below any fixed fraction within the same cell, while interior
unsaturated regions stay visible); for the limit the support comes from the
forward-averaged pressure at the extractor default threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    FrontierRecord,
    Mask,
    dilate,
    distance_to_mask,
    erode,
    extract_frontier,
    flow_map_set,
    hausdorff_distance,
    inf_convolve,
    sample_field_at_points,
    spacetime_frontier_distance,
    sup_convolve,
    _rk4_push,
    _streamline_step,
)
from .grids import Field, l1_distance, laplacian, linf_norm
from .heleshaw import LimitTrajectory
from .model import AssumptionReport, ModelSpec, ab_constant, audit_assumptions, default_p_max
from .pme import Trajectory

DENSITY_SUPPORT_REL = 0.05
MAX_PROBES = 512


# ---------------------------------------------------------------------------
# support extraction per run type
# ---------------------------------------------------------------------------

def trajectory_support(traj: Trajectory, t: float,
                       rel_threshold: float = DENSITY_SUPPORT_REL) -> FrontierRecord:
    """Finite-m support: density above a relative threshold."""
    rho = traj.density_at(t)
    thr = max(1e-10, rel_threshold * float(np.max(rho.values)))
    return extract_frontier(rho, thr)


def limit_support(ltraj: LimitTrajectory, t: float) -> FrontierRecord:
    """Limit support: forward-averaged pressure at the extractor default."""
    return extract_frontier(ltraj.averaged_pressure_at(t))


def run_support(run, t: float) -> FrontierRecord:
    if isinstance(run, LimitTrajectory):
        return limit_support(run, t)
    return trajectory_support(run, t)


def pressure_frontier(run, t: float) -> FrontierRecord:
    """Frontier of the pressure itself, at the extractor default threshold.

    Probe points for near-front pressure statistics live here rather than
    on the density-thresholded set: for steep profiles both coincide, while
    for mild exponents the density threshold sits visibly inside the front
    and would bias ball averages by the local pressure value.
    """
    if isinstance(run, LimitTrajectory):
        return extract_frontier(run.averaged_pressure_at(t))
    return extract_frontier(run.pressure_at(t))


# ---------------------------------------------------------------------------
# fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r2: float
    n_points: int
    conclusive: bool

    def as_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "n_points": self.n_points, "conclusive": self.conclusive}


def fit_loglog(xs, ys, min_points: int = 4, r2_floor: float = 0.8) -> LogLogFit:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = (xs > 0) & (ys > 0) & np.isfinite(xs) & np.isfinite(ys)
    xs, ys = np.log(xs[keep]), np.log(ys[keep])
    n = len(xs)
    if n < max(2, min_points):
        return LogLogFit(math.nan, math.nan, 0.0, n, False)
    A = np.vstack([xs, np.ones(n)]).T
    (slope, intercept), res, *_ = np.linalg.lstsq(A, ys, rcond=None)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    ss_res = float(res[0]) if len(res) else float(np.sum((A @ [slope, intercept] - ys) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LogLogFit(float(slope), float(intercept), r2, n, r2 >= r2_floor)


# ---------------------------------------------------------------------------
# probe sampling helpers
# ---------------------------------------------------------------------------

def _boundary_points(rec: FrontierRecord, max_probes: int = MAX_PROBES) -> np.ndarray:
    """Every k-th boundary cell center in raster order, k chosen deterministically."""
    g = rec.boundary.grid
    pts = g.points()[rec.boundary.bits.ravel()]
    if len(pts) == 0:
        return pts.reshape(0, g.dimension)
    stride = max(1, int(math.ceil(len(pts) / max_probes)))
    return pts[::stride]


def _outer_band_points(rec: FrontierRecord, max_probes: int = MAX_PROBES) -> np.ndarray:
    """Boundary cells just outside the support, deterministically subsampled."""
    g = rec.boundary.grid
    outer = rec.boundary.bits & ~rec.support.bits
    pts = g.points()[outer.ravel()]
    if len(pts) == 0:
        return pts.reshape(0, g.dimension)
    stride = max(1, int(math.ceil(len(pts) / max_probes)))
    return pts[::stride]


def _ball_offsets(dimension: int, k: int) -> np.ndarray:
    off = np.arange(-k, k + 1)
    if dimension == 1:
        return off[np.abs(off) <= k].reshape(-1, 1)
    oi, oj = np.meshgrid(off, off, indexing="ij")
    keep = oi**2 + oj**2 <= k * k + 1e-9
    return np.stack([oi[keep], oj[keep]], axis=-1)


def ball_average(p: Field, center: np.ndarray, r: float) -> float:
    """Exact cell-sum average of p over cells whose center lies in B(center, r)."""
    g = p.grid
    center = np.asarray(center, dtype=float).ravel()
    k = int(math.floor(r / g.dx)) + 1
    idx0 = g.index_of(center.reshape(1, -1))[0]
    off = np.arange(-k, k + 1)
    if g.dimension == 1:
        cells = (idx0[0] + off).reshape(-1, 1)
    else:
        oi, oj = np.meshgrid(off, off, indexing="ij")
        cells = np.stack([idx0[0] + oi.ravel(), idx0[1] + oj.ravel()], axis=-1)
    inside = np.all((cells >= 0) & (cells < g.cells_per_axis), axis=1)
    cells = cells[inside]
    centers = np.asarray(g.origin) + (cells + 0.5) * g.dx
    keep = np.sum((centers - center) ** 2, axis=1) <= r * r + 1e-12 * g.dx**2
    cells = cells[keep]
    if len(cells) == 0:
        return math.nan
    return float(np.mean(p.values[tuple(cells.T)]))


def front_probe_points(p: Field, rel_level: float = 0.02,
                       max_probes: int = MAX_PROBES,
                       max_correction_cells: float = 3.0) -> np.ndarray:
    """Sub-cell front locations by linear extrapolation of the pressure.

    Takes the inner band of the level set {p > rel_level * max p} (a level
    safely on the developed profile, above the smeared foot) and shifts each
    cell center outward by p / |grad p| so the returned points sit where the
    linear profile vanishes.  The correction is clamped to a few cells.
    """
    g = p.grid
    level = rel_level * float(np.max(p.values))
    rec = extract_frontier(p, level)
    if rec.support.is_empty():
        return np.zeros((0, g.dimension))
    inner = rec.boundary.bits & rec.support.bits
    pts = g.points()[inner.ravel()]
    if len(pts) == 0:
        return pts.reshape(0, g.dimension)
    stride = max(1, int(math.ceil(len(pts) / max_probes)))
    pts = pts[::stride]
    vals = sample_field_at_points(p, pts)
    eps = 1e-30
    grads = []
    for axis in range(g.dimension):
        e = np.zeros(g.dimension)
        e[axis] = g.dx
        grads.append((sample_field_at_points(p, pts + e) - sample_field_at_points(p, pts - e))
                     / (2.0 * g.dx))
    grad = np.stack(grads, axis=-1)
    norm = np.sqrt(np.sum(grad**2, axis=1)) + eps
    shift = np.minimum(vals / norm, max_correction_cells * g.dx)
    outward = -grad / norm[:, None]
    return pts + outward * shift[:, None]


# ---------------------------------------------------------------------------
# interior floor check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AbReport:
    c0: float
    improved_floor: bool
    tol_scale: float
    rows: tuple  # (t, min_q, floor, margin, tol, n_interior)
    passed: bool

    def as_dict(self):
        return {
            "c0": self.c0,
            "improved_floor": self.improved_floor,
            "rows": [list(r) for r in self.rows],
            "passed": self.passed,
        }


def ab_check(traj: Trajectory, spec: ModelSpec, eta0: float,
             audit: AssumptionReport | None = None,
             interior_cells: float = 4.0) -> AbReport:
    """Interior minimum of lap_h p + div b + f against the theoretical floor.

    The floor is -(C0 + 1/t)/(m - 1), or -C0/(m - 1) down to t = 0 when the
    initial semi-convexity check holds.  Interior cells are the support
    eroded by ``interior_cells`` cells: the stencil reaches two cells and
    the scheme smears the pressure foot over another two, so four is the
    smallest depth at which the stencil sees only the developed profile.
    Pass tolerance: max(0.1, 10 dx) (1 + |p|_inf) per snapshot.
    """
    if eta0 < 0:
        raise ValueError("eta0 must be non-negative")
    rep = audit if audit is not None else audit_assumptions(spec)
    p_max = default_p_max(spec)
    c0 = ab_constant(spec, p_max, rep)
    improved = bool(rep.satisfied.get("r11", False))
    g = traj.grid
    m = spec.m
    coords = g.meshgrid()
    rows = []
    passed = True
    for t, rho, p in traj.snapshots:
        if not improved and t < eta0:
            continue
        if t <= 0.0 and not improved:
            continue
        supp = trajectory_support(traj, t)
        interior = erode(supp.support, interior_cells * g.dx)
        if interior.is_empty():
            continue
        q = laplacian(p).values + spec.drift.divergence(coords, t) \
            + spec.source.value(coords, t, p.values)
        min_q = float(np.min(q[interior.bits]))
        floor = -c0 / (m - 1.0) if improved else -(c0 + 1.0 / max(t, 1e-12)) / (m - 1.0)
        tol = max(0.1, 10.0 * g.dx) * (1.0 + linf_norm(p))
        margin = min_q - floor
        ok = margin >= -tol
        passed = passed and ok
        rows.append((t, min_q, floor, margin, tol, interior.count))
    return AbReport(c0, improved, max(0.1, 10.0 * g.dx), tuple(rows), passed)


# ---------------------------------------------------------------------------
# average-pressure probes and the dichotomy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NondegeneracyProbe:
    t0: float
    radii: tuple
    probes: tuple  # per probe: (x, averages per radius, stays_on_frontier)
    pooled_fit: LogLogFit
    floor_exponent: float

    def as_dict(self):
        return {
            "t0": self.t0,
            "radii": list(self.radii),
            "n_probes": len(self.probes),
            "pooled_fit": self.pooled_fit.as_dict(),
            "floor_exponent": self.floor_exponent,
        }


def avg_pressure_probe(traj: Trajectory, spec: ModelSpec, t0: float,
                       radii, max_probes: int = MAX_PROBES,
                       gamma: float = 5.0) -> NondegeneracyProbe:
    """Ball averages of the pressure at sampled frontier points.

    Radii below two cells are rejected; each probe also carries the
    dichotomy flag: whether its backward streamline stays on the frontier
    band (within two cells) at every earlier snapshot or detaches.
    """
    g = traj.grid
    radii = tuple(float(r) for r in radii)
    if any(r < 2.0 * g.dx - 1e-12 for r in radii):
        raise ValueError("probe radii must be at least two cells")
    p = traj.pressure_at(t0)
    pts = front_probe_points(p, max_probes=max_probes)
    earlier = [t for t in traj.times if t < t0 - 1e-14]
    frontier_dists = {}
    for t in earlier:
        frontier_dists[t] = distance_to_mask(pressure_frontier(traj, t).boundary)
    h = _streamline_step(spec, g, t0)
    probes = []
    xs_all, ys_all = [], []
    for x0 in pts:
        avgs = []
        for r in radii:
            a = ball_average(p, x0, r)
            avgs.append(a)
            if np.isfinite(a) and a > 0:
                xs_all.append(r)
                ys_all.append(a)
        stays = True
        for t in earlier:
            back = _rk4_push(x0.reshape(1, -1), t0, t - t0, spec.drift, h)
            d = sample_field_at_points(frontier_dists[t], back)[0]
            if d > 2.0 * g.dx:
                stays = False
                break
        probes.append((tuple(x0), tuple(avgs), stays))
    pooled = fit_loglog(xs_all, ys_all)
    return NondegeneracyProbe(t0, radii, tuple(probes), pooled, 2.0 - 1.0 / gamma)


# ---------------------------------------------------------------------------
# strict expansion along streamlines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionReport:
    eta0: float
    s_ladder: tuple
    backward_rows: tuple  # (t0, s, max_dist, min_dist, n_probes)
    backward_positive_fraction: float
    power_fit: LogLogFit  # distance ~ C_* s^gamma on probe minima
    forward_cap: float    # max over pairs of sup-dist / sqrt(s)
    initial_expansion: tuple  # (tau, measured r_tau)

    def as_dict(self):
        return {
            "eta0": self.eta0,
            "s_ladder": list(self.s_ladder),
            "backward_rows": [list(r) for r in self.backward_rows],
            "backward_positive_fraction": self.backward_positive_fraction,
            "power_fit": self.power_fit.as_dict(),
            "forward_cap": self.forward_cap,
            "initial_expansion": [list(r) for r in self.initial_expansion],
        }


def strict_expansion_measure(traj: Trajectory, spec: ModelSpec, eta0: float,
                             s_ladder=None, max_probes: int = MAX_PROBES) -> ExpansionReport:
    """Backward separation of frontier points from earlier supports.

    For sampled frontier points (x0, t0) with t0 >= eta0 and ladder offsets
    s, measures d(X(x0, t0; -s), support(t0 - s)); fits the power law on the
    per-(t0, s) minimum distance.  The forward cap is the largest ratio
    sup_{x in supp(t0+s)} d(x, flow map of supp(t0)) / sqrt(s).  Also
    measures the initial-time expansion radius r_tau of the flow-mapped
    initial support inside supp(tau).
    """
    times = traj.times
    if len(times) < 3:
        raise ValueError("need at least three snapshots")
    spacing = times[1] - times[0]
    if eta0 < 2.0 * spacing - 1e-12:
        raise ValueError("eta0 must cover at least two snapshot spacings")
    g = traj.grid
    supports = {t: pressure_frontier(traj, t) for t in times}
    h = _streamline_step(spec, g, times[-1])

    rows = []
    fit_s, fit_d = [], []
    n_pos = 0
    n_tot = 0
    for t0 in [t for t in times if t >= eta0 - 1e-14]:
        pts = _outer_band_points(supports[t0], max_probes)
        if len(pts) == 0:
            continue
        ladder = s_ladder if s_ladder is not None else [t0 - t for t in times if 0 < t0 - t <= t0]
        for s in ladder:
            t_prev = t0 - s
            match = [t for t in times if abs(t - t_prev) <= 1e-12 * max(1.0, times[-1])]
            if not match:
                continue
            rec_prev = supports[match[0]]
            if rec_prev.support.is_empty():
                continue
            back = _rk4_push(pts, t0, -s, spec.drift, h)
            d = sample_field_at_points(rec_prev.dist_to_support, back)
            rows.append((t0, s, float(np.max(d)), float(np.min(d)), len(pts)))
            n_tot += 1
            if np.min(d) > 0:
                n_pos += 1
            if np.min(d) > g.dx:
                fit_s.append(s)
                fit_d.append(float(np.min(d)))

    # forward speed cap on consecutive-and-beyond pairs
    cap = 0.0
    for i, t0 in enumerate(times[:-1]):
        if supports[t0].support.is_empty():
            continue
        for t1 in times[i + 1 :]:
            s = t1 - t0
            flow = flow_map_set(supports[t0].support, t0, s, spec)
            target = supports[t1].support
            if target.is_empty() or flow.is_empty():
                continue
            dist = distance_to_mask(flow).values
            excess = float(np.max(dist[target.bits]))
            cap = max(cap, excess / math.sqrt(s))

    # initial-time expansion radii
    initial = []
    s0 = supports[times[0]].support
    if not s0.is_empty():
        for tau in times[1:4]:
            flow = flow_map_set(s0, times[0], tau - times[0], spec)
            rec_tau = supports[tau]
            if rec_tau.support.is_empty():
                continue
            inside = rec_tau.dist_to_complement.values[flow.bits]
            r_tau = float(np.min(inside)) if np.all(rec_tau.support.bits[flow.bits]) else 0.0
            initial.append((tau, r_tau))

    frac = n_pos / n_tot if n_tot else 0.0
    return ExpansionReport(
        eta0,
        tuple(s_ladder) if s_ladder is not None else (),
        tuple(rows),
        frac,
        fit_loglog(fit_s, fit_d),
        cap,
        tuple(initial),
    )


# ---------------------------------------------------------------------------
# streamline monotonicity and pointwise decay
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StreamlineReport:
    containment_rows: tuple  # (t0, t1, excess_cells, contained)
    all_contained: bool
    decay_fraction: float
    decay_rows: tuple  # (t0, t1, fraction_ok, n_probes)

    def as_dict(self):
        return {
            "containment_rows": [list(r) for r in self.containment_rows],
            "all_contained": self.all_contained,
            "decay_fraction": self.decay_fraction,
            "decay_rows": [list(r) for r in self.decay_rows],
        }


def streamline_check(run, spec: ModelSpec, eta0: float = 0.1,
                     audit: AssumptionReport | None = None,
                     slack_cells: float = 2.0,
                     max_probes: int = MAX_PROBES) -> StreamlineReport:
    """Flow-map containment for all snapshot pairs plus sampled pointwise decay.

    Containment: the flow-mapped support at t0 must land inside the support
    at t1 dilated by ``slack_cells``.  Decay (finite m only): at interior
    probes, p(X(s), t0 + s) >= exp(-(C0 + 1/t0) s) p(x0, t0) - 10 dx.
    """
    is_limit = isinstance(run, LimitTrajectory)
    g = run.grid
    times = run.times
    supports = {t: run_support(run, t) for t in times}
    rows = []
    all_ok = True
    for i, t0 in enumerate(times[:-1]):
        if supports[t0].support.is_empty():
            continue
        for t1 in times[i + 1 :]:
            flow = flow_map_set(supports[t0].support, t0, t1 - t0, spec)
            target = dilate(supports[t1].support, slack_cells * g.dx)
            if target.is_empty():
                ok = False
                excess = math.inf
            else:
                outside = flow.bits & ~target.bits
                if outside.any():
                    d = distance_to_mask(supports[t1].support).values
                    excess = float(np.max(d[flow.bits])) / g.dx
                    ok = False
                else:
                    excess = 0.0
                    ok = True
            all_ok = all_ok and ok
            rows.append((t0, t1, excess, ok))

    decay_rows = []
    frac = 1.0
    if not is_limit:
        rep = audit if audit is not None else audit_assumptions(spec)
        c0 = ab_constant(spec, default_p_max(spec), rep)
        h = _streamline_step(spec, g, times[-1])
        n_ok = 0
        n_tot = 0
        for i, t0 in enumerate(times):
            if t0 < eta0 - 1e-14 or t0 <= 0:
                continue
            rec = supports[t0]
            interior = erode(rec.support, 2.0 * g.dx)
            if interior.is_empty():
                continue
            pts = g.points()[interior.bits.ravel()]
            stride = max(1, int(math.ceil(len(pts) / max_probes)))
            pts = pts[::stride]
            p0 = sample_field_at_points(run.pressure_at(t0), pts)
            c_t0 = c0 + 1.0 / t0
            for t1 in times[i + 1 :]:
                s = t1 - t0
                moved = _rk4_push(pts, t0, s, spec.drift, h)
                p1 = sample_field_at_points(run.pressure_at(t1), moved)
                bound = np.exp(-c_t0 * s) * p0 - 10.0 * g.dx
                ok = p1 >= bound
                n_ok += int(np.sum(ok))
                n_tot += len(ok)
                decay_rows.append((t0, t1, float(np.mean(ok)), len(ok)))
        frac = n_ok / n_tot if n_tot else 1.0
    return StreamlineReport(tuple(rows), all_ok, frac, tuple(decay_rows))


# ---------------------------------------------------------------------------
# exponent-sweep convergence tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceTable:
    m_values: tuple
    includes_limit: bool
    eta0: float
    times: tuple
    pressure_l1_spacetime: dict      # (m, l) -> float, l may be "inf"
    initial_support_hausdorff: dict  # (m, l) -> float
    initial_vs_limit: dict           # m -> float
    per_time_hausdorff: dict         # (m, l) -> {t: d}
    early_time_hausdorff: dict       # (m, l) -> {t: d}, t < eta0
    containment_cells: dict          # (m, l) -> {t: smallest k}
    spacetime_frontier: dict         # (m, l) -> float
    frontier_probe: dict             # (m, l) -> rows (t0, max over FB pts of
                                     #   [min_s d(x, supp_l(t0-s)), d(x, comp_l(t0-r))])
    good_part_fraction: dict         # t -> fraction of limit boundary cells marked good

    def as_dict(self):
        def keyed(d):
            return {f"{k[0]}|{k[1]}" if isinstance(k, tuple) else str(k): v for k, v in d.items()}
        return {
            "m_values": list(self.m_values),
            "includes_limit": self.includes_limit,
            "eta0": self.eta0,
            "times": list(self.times),
            "pressure_l1_spacetime": keyed(self.pressure_l1_spacetime),
            "initial_support_hausdorff": keyed(self.initial_support_hausdorff),
            "initial_vs_limit": keyed(self.initial_vs_limit),
            "per_time_hausdorff": {f"{k[0]}|{k[1]}": v for k, v in self.per_time_hausdorff.items()},
            "early_time_hausdorff": {f"{k[0]}|{k[1]}": v for k, v in self.early_time_hausdorff.items()},
            "containment_cells": {f"{k[0]}|{k[1]}": v for k, v in self.containment_cells.items()},
            "spacetime_frontier": keyed(self.spacetime_frontier),
            "frontier_probe": {f"{k[0]}|{k[1]}": [list(r) for r in v]
                               for k, v in self.frontier_probe.items()},
            "good_part_fraction": {str(k): v for k, v in self.good_part_fraction.items()},
        }


def good_part_cells(ltraj: LimitTrajectory, t: float, radius_cells: float = 3.0) -> Mask:
    """Boundary cells witnessing both robust positivity and a void nearby.

    A limit boundary cell is good when the ball of ``radius_cells`` around
    it meets the one-cell-eroded support and the one-cell-eroded complement
    in the same or an adjacent snapshot.  This is the grid stand-in for the
    two-sided space-time neighborhoods; corner cases are untestable at grid
    scale and reported as a fraction rather than certified.
    """
    g = ltraj.grid
    times = ltraj.times
    i = min(range(len(times)), key=lambda k: abs(times[k] - t))
    nearby = [times[j] for j in (i - 1, i, i + 1) if 0 <= j < len(times)]
    recs = [limit_support(ltraj, s) for s in nearby]
    rec0 = recs[nearby.index(times[i])]
    boundary = rec0.boundary
    if boundary.is_empty():
        return boundary
    r = radius_cells * g.dx
    pos_ok = np.zeros(g.shape, dtype=bool)
    void_ok = np.zeros(g.shape, dtype=bool)
    for rec in recs:
        core = erode(rec.support, 1.0 * g.dx)
        if not core.is_empty():
            pos_ok |= dilate(core, r).bits
        hole = erode(Mask(g, ~rec.support.bits, rec.time), 1.0 * g.dx)
        if not hole.is_empty():
            void_ok |= dilate(hole, r).bits
    return Mask(g, boundary.bits & pos_ok & void_ok, rec0.time)


def convergence_report(trajs: dict, limit_traj: LimitTrajectory | None, eta0: float,
                       time_weight: float | None = None,
                       probe_r: float | None = None) -> ConvergenceTable:
    """Pairwise convergence metrics over an exponent sweep plus the limit."""
    ms = sorted(trajs)
    if len(ms) < 1:
        raise ValueError("need at least one finite-m trajectory")
    base = trajs[ms[0]]
    times = tuple(base.times)
    g = base.grid
    for m in ms:
        if tuple(trajs[m].times) != times or trajs[m].grid != g:
            raise ValueError("trajectories must share grid and save times")
    if limit_traj is not None:
        if tuple(limit_traj.times) != times or limit_traj.grid != g:
            raise ValueError("limit trajectory must share grid and save times")
    runs = {m: trajs[m] for m in ms}
    labels = list(ms) + (["inf"] if limit_traj is not None else [])

    def _run(label):
        return limit_traj if label == "inf" else runs[label]

    def _pressure(label, t):
        if label == "inf":
            return limit_traj.state_at(t).p
        return runs[label].pressure_at(t)

    supports = {
        (label, t): run_support(_run(label), t) for label in labels for t in times
    }

    dt_w = np.gradient(np.asarray(times)) if len(times) > 1 else np.array([1.0])

    table_l1 = {}
    init_dh = {}
    init_vs_limit = {}
    per_time = {}
    early_time = {}
    containment = {}
    st_frontier = {}
    frontier_probe = {}

    w = time_weight if time_weight is not None else (
        g.dx / (times[1] - times[0]) if len(times) > 1 else 1.0
    )
    r_probe = probe_r if probe_r is not None else math.sqrt(max(times[1] - times[0], g.dx**2)) \
        if len(times) > 1 else g.dx

    for i, a in enumerate(labels):
        for bl in labels[i + 1 :]:
            # pairwise space-time L1 pressure distance
            acc = 0.0
            for k, t in enumerate(times):
                acc += l1_distance(_pressure(a, t), _pressure(bl, t)) * float(dt_w[k])
            table_l1[(a, bl)] = acc
            # initial supports
            sa0, sb0 = supports[(a, times[0])], supports[(bl, times[0])]
            if not sa0.support.is_empty() and not sb0.support.is_empty():
                d0 = hausdorff_distance(sa0.support, sb0.support)
                if bl == "inf":
                    init_vs_limit[a] = d0
                else:
                    init_dh[(a, bl)] = d0
            # per-time Hausdorff and containment
            per_time[(a, bl)] = {}
            early_time[(a, bl)] = {}
            containment[(a, bl)] = {}
            for t in times:
                sa, sb = supports[(a, t)], supports[(bl, t)]
                if sa.support.is_empty() or sb.support.is_empty():
                    continue
                d = hausdorff_distance(sa.support, sb.support)
                if t >= eta0 - 1e-14:
                    per_time[(a, bl)][t] = d
                    # smallest k with supp_a(t) inside the k-cell dilation of supp_b(t)
                    reach = float(np.max(sb.dist_to_support.values[sa.support.bits]))
                    containment[(a, bl)][t] = int(math.ceil(max(0.0, reach) / g.dx - 1e-9))
                else:
                    early_time[(a, bl)][t] = d
            # space-time frontier distance over t >= eta0
            fa = [supports[(a, t)] for t in times if t >= eta0 - 1e-14]
            fb = [supports[(bl, t)] for t in times if t >= eta0 - 1e-14]
            try:
                st = spacetime_frontier_distance(fa, fb, w)
                st_frontier[(a, bl)] = st.value
            except Exception:
                st_frontier[(a, bl)] = math.inf
            # frontier two-sided probe: FB points of the smaller exponent
            rows = []
            for t0 in [t for t in times if t >= eta0 - 1e-14]:
                pts = _boundary_points(supports[(a, t0)], 256)
                if len(pts) == 0:
                    continue
                s_frames = [t0 - t for t in times if 0 <= t0 - t <= r_probe**2 + 1e-14]
                dist_in = np.full(len(pts), math.inf)
                for s in s_frames:
                    rec_l = supports[(bl, t0 - s)]
                    if rec_l.support.is_empty():
                        continue
                    d = sample_field_at_points(rec_l.dist_to_support, pts)
                    dist_in = np.minimum(dist_in, d)
                t_back = max((t for t in times if t <= t0 - r_probe + 1e-14), default=None)
                dist_out = math.inf
                if t_back is not None:
                    rec_l = supports[(bl, t_back)]
                    comp = Mask(g, ~rec_l.support.bits, t_back)
                    if not comp.is_empty():
                        dcomp = distance_to_mask(comp)
                        dist_out = float(np.max(sample_field_at_points(dcomp, pts)))
                rows.append((t0, float(np.max(dist_in)), dist_out))
            frontier_probe[(a, bl)] = tuple(rows)

    good_fraction = {}
    if limit_traj is not None:
        for t in times:
            if t < eta0 - 1e-14:
                continue
            rec = supports[("inf", t)]
            if rec.boundary.is_empty():
                continue
            good = good_part_cells(limit_traj, t)
            good_fraction[t] = good.count / rec.boundary.count

    return ConvergenceTable(
        m_values=tuple(ms),
        includes_limit=limit_traj is not None,
        eta0=eta0,
        times=times,
        pressure_l1_spacetime=table_l1,
        initial_support_hausdorff=init_dh,
        initial_vs_limit=init_vs_limit,
        per_time_hausdorff=per_time,
        early_time_hausdorff=early_time,
        containment_cells=containment,
        spacetime_frontier=st_frontier,
        frontier_probe=frontier_probe,
        good_part_fraction=good_fraction,
    )


# ---------------------------------------------------------------------------
# covering dimension
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DimensionEstimate:
    radii: tuple
    counts: tuple
    fit: LogLogFit
    dimension: float
    bound_dm: float | None
    tripled_cover_ok: bool

    def as_dict(self):
        return {
            "radii": list(self.radii),
            "counts": list(self.counts),
            "fit": self.fit.as_dict(),
            "dimension": self.dimension,
            "bound_dm": self.bound_dm,
            "tripled_cover_ok": self.tripled_cover_ok,
        }


def covering_dimension(frontier: FrontierRecord, radii,
                       m: float | None = None, sigma_m: float = 1.0,
                       mu: float = 2.0) -> DimensionEstimate:
    """Greedy disjoint-ball packing counts on the frontier, slope on log-log.

    Picks frontier cells in raster order, excluding a 2R ball around each
    pick; the tripled balls then cover the frontier automatically, which is
    verified and reported.  The implied dimension is the fitted slope of
    log count against log(1/R).
    """
    g = frontier.boundary.grid
    pts = g.points()[frontier.boundary.bits.ravel()]
    if len(pts) < 16:
        raise ValueError(f"frontier too small for a covering fit ({len(pts)} cells)")
    radii = sorted(float(r) for r in radii)
    if len(radii) < 4:
        raise ValueError("need at least four radii")
    diam = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
    if radii[0] < 3.0 * g.dx - 1e-12:
        raise ValueError("radii must be at least three cells")
    if radii[-1] > 0.25 * diam + 1e-12:
        raise ValueError("largest radius must stay under a quarter of the diameter")
    counts = []
    cover_ok = True
    for R in radii:
        picked = []
        pa = np.empty((0, pts.shape[1]))
        for x in pts:
            if len(picked) == 0 or np.min(np.sum((pa - x) ** 2, axis=1)) >= (2.0 * R) ** 2:
                picked.append(x)
                pa = np.asarray(picked)
        counts.append(len(picked))
        worst = math.sqrt(float(np.max(np.min(
            ((pts[:, None, :] - pa[None, :, :]) ** 2).sum(axis=2), axis=1))))
        cover_ok = cover_ok and worst <= 3.0 * R + 1e-9
    fit = fit_loglog([1.0 / r for r in radii], counts)
    bound = None
    if m is not None and np.isfinite(m):
        bound = g.dimension - sigma_m + mu / (m - 1.0)
    return DimensionEstimate(tuple(radii), tuple(counts), fit, fit.slope, bound, cover_ok)


# ---------------------------------------------------------------------------
# oscillation integrals
# ---------------------------------------------------------------------------

def oscillation_integral(rho: Field, r: float) -> float:
    """integral of (sup over B(x, r) - inf over B(x, r)) of rho, dx."""
    if r < rho.grid.dx - 1e-12:
        raise ValueError("radius must be at least one cell")
    hi = sup_convolve(rho, r).values
    lo = inf_convolve(rho, r).values
    return float(np.sum(hi - lo) * rho.grid.cell_volume)


def oscillation_exponent(rho: Field, radii) -> LogLogFit:
    """Fit of log oscillation integral against log radius."""
    vals = [oscillation_integral(rho, r) for r in radii]
    return fit_loglog(radii, vals)


@dataclass(frozen=True)
class OscillationPropagation:
    radii: tuple
    fitted_c: float
    passed: bool
    rows: tuple  # (t, r, osc)

    def as_dict(self):
        return {"radii": list(self.radii), "fitted_c": self.fitted_c,
                "passed": self.passed, "rows": [list(r) for r in self.rows]}


def oscillation_propagation(traj, radii, c_max: float = 20.0) -> OscillationPropagation:
    """Smallest C <= c_max with osc(t, r) <= C (r + osc(0, C r)) for all t, r.

    osc(0, .) is sampled once on a log ladder and interpolated; it saturates
    once the ball swallows the support, so extrapolation uses the last value.
    """
    radii = sorted(float(r) for r in radii)
    rho0 = traj.snapshots[0][1]
    g = traj.grid
    r_hi = min(c_max * radii[-1], 0.45 * g.extent)
    ladder0 = np.geomspace(max(radii[0] / 2.0, g.dx), r_hi, 12)
    osc0_vals = np.array([oscillation_integral(rho0, r) for r in ladder0])

    def osc0(r):
        if r <= ladder0[0]:
            return float(osc0_vals[0])
        if r >= ladder0[-1]:
            return float(osc0_vals[-1])
        return float(np.interp(r, ladder0, osc0_vals))

    rows = []
    for t, rho, *_ in traj.snapshots:
        for r in radii:
            rows.append((t, r, oscillation_integral(rho, r)))

    def _holds(c):
        for _, r, osc in rows:
            if osc > c * (r + osc0(c * r)) + 1e-12:
                return False
        return True

    if not _holds(c_max):
        return OscillationPropagation(tuple(radii), math.inf, False, tuple(rows))
    lo_c, hi_c = 0.0, c_max
    for _ in range(40):
        mid = 0.5 * (lo_c + hi_c)
        if _holds(mid):
            hi_c = mid
        else:
            lo_c = mid
    return OscillationPropagation(tuple(radii), hi_c, True, tuple(rows))
