"""Problem instances: exponent, drift, source, initial data, and their audits.

A :class:`ModelSpec` pins down one evolution problem.  The audit samples the
standing structural conditions (coefficient bounds, the positivity of the
divergence/source combination that the interior lower bound on
``lap p + div b + f`` needs, and the initial semi-convexity check) and
evaluates the theoretical constants used by the diagnostics: the interior
floor constant and the a priori support radius envelope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from . import barenblatt
from .errors import NegativeDensityError, NonFiniteFieldError, UnsupportedRegimeError
from .forcing import Drift, Source, ZeroDrift, ZeroSource
from .grids import Field, Grid, laplacian, linf_norm

INFINITE_M = math.inf


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

KINDS = ("barenblatt", "smooth_bump", "patch", "annulus_plus_core", "custom_grid")


@dataclass(frozen=True)
class InitialData:
    """Initial pressure (finite m) and the companion limit density.

    kind-specific parameters:

    * ``barenblatt``: ``t_offset`` (> 0), ``center``, and either ``C``
      (profile constant) or ``radius`` (support radius at ``t_offset``,
      converted to the matching C per exponent)
    * ``smooth_bump``: ``amplitude``, ``radius``, ``center``, ``gamma0``,
      ``sigma0``, ``exponent`` -- profile
      amplitude * (1 - r^2/R^2)_+^exponent with exponent defaulting to
      (2 - sigma0)/2; it dominates gamma0 * dist^(2 - sigma0) when
      amplitude >= gamma0 * radius^(2 - sigma0) and exponent stays at the
      default (exponent 1 gives the parabolic profile whose initial
      semi-convexity check can pass)
    * ``patch``: ``amplitude``, ``radius``, ``center``; for finite m the
      indicator is smoothed by one averaging pass over a ball of
      ``mollify_cells`` cells, the limit keeps the raw indicator
    * ``annulus_plus_core``: unsaturated quadratic core inside a saturated
      annulus; fixed radii 1, 3/2, 2 around ``center``
    * ``custom_grid``: ``values`` (nested list), pressure for finite m and
      density in [0, 1] for the limit
    """

    kind: str
    params: dict = field(default_factory=dict)
    support_radius: float = 1.0
    mollify_cells: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown initial data kind {self.kind!r}")

    def _center(self, grid: Grid):
        return np.asarray(self.params.get("center", (0.0,) * grid.dimension), dtype=float)

    def _r(self, grid: Grid) -> np.ndarray:
        coords = grid.meshgrid()
        c = self._center(grid)
        return np.sqrt(sum((coords[k] - c[k]) ** 2 for k in range(grid.dimension)))

    def pressure(self, grid: Grid, m: float) -> Field:
        """Initial pressure for a finite exponent."""
        if not (np.isfinite(m) and m > 1):
            raise ValueError("finite m > 1 required for an initial pressure")
        r = self._r(grid)
        if self.kind == "barenblatt":
            t0 = float(self.params.get("t_offset", 0.5))
            if "radius" in self.params:
                _, beta, kappa = barenblatt.exponents(m, grid.dimension)
                C = kappa * float(self.params["radius"]) ** 2 * t0 ** (-2.0 * beta)
            else:
                C = float(self.params.get("C", 0.1))
            vals = barenblatt.pressure_values(r**2, t0, m, grid.dimension, C)
        elif self.kind == "smooth_bump":
            R = float(self.params.get("radius", 1.0))
            sigma0 = float(self.params.get("sigma0", 0.5))
            gamma0 = float(self.params.get("gamma0", 1.0))
            amp = float(self.params.get("amplitude", gamma0 * R ** (2.0 - sigma0)))
            q = float(self.params.get("exponent", (2.0 - sigma0) / 2.0))
            vals = amp * np.maximum(1.0 - (r / R) ** 2, 0.0) ** q
        elif self.kind == "patch":
            R = float(self.params.get("radius", 1.0))
            amp = float(self.params.get("amplitude", 1.0))
            vals = np.where(r <= R, amp, 0.0)
            vals = _mollify(vals, self.mollify_cells)
        elif self.kind == "annulus_plus_core":
            vals = _annulus_core_pressure(r, m)
        elif self.kind == "custom_grid":
            vals = np.asarray(self.params["values"], dtype=float)
        else:  # pragma: no cover
            raise AssertionError(self.kind)
        if np.any(vals < 0):
            raise ValueError("initial pressure must be non-negative")
        return Field(grid, vals, 0.0)

    def limit_density(self, grid: Grid) -> Field:
        """Initial density in [0, 1] for the incompressible problem."""
        r = self._r(grid)
        if self.kind == "barenblatt":
            raise ValueError("barenblatt initial data has no incompressible counterpart")
        if self.kind == "smooth_bump":
            R = float(self.params.get("radius", 1.0))
            vals = np.where(r < R, 1.0, 0.0)
        elif self.kind == "patch":
            R = float(self.params.get("radius", 1.0))
            vals = np.where(r <= R, 1.0, 0.0)
        elif self.kind == "annulus_plus_core":
            vals = np.where(r <= 1.0, 0.5 + 0.5 * r**2, np.where(r < 2.0, 1.0, 0.0))
        elif self.kind == "custom_grid":
            vals = np.asarray(self.params["values"], dtype=float)
            if np.any(vals < 0) or np.any(vals > 1.0 + 1e-12):
                raise ValueError("custom limit density must lie in [0, 1]")
        else:  # pragma: no cover
            raise AssertionError(self.kind)
        return Field(grid, vals, 0.0)

    def verify_subquadratic_growth(self, grid: Grid, m: float) -> dict:
        """Sample the near-boundary lower bound p0 >= gamma0 * dist^(2 - sigma0).

        Returns the worst sampled ratio p0 / bound over the support and the
        pass flag (ratio >= 1 up to a one-cell slack on the distance).
        """
        gamma0 = float(self.params.get("gamma0", 1.0))
        sigma0 = float(self.params.get("sigma0", 0.5))
        p0 = self.pressure(grid, m)
        supp = p0.values > 0.0
        if not supp.any():
            return {"ok": False, "worst_ratio": 0.0, "gamma0": gamma0, "sigma0": sigma0}
        # distance to the complement, shrunk one cell to forgive rasterization
        dist = ndimage.distance_transform_edt(supp, sampling=grid.dx)
        dist = np.maximum(dist - grid.dx, 0.0)
        bound = gamma0 * dist ** (2.0 - sigma0)
        inside = supp & (bound > 0.0)
        if not inside.any():
            return {"ok": True, "worst_ratio": math.inf, "gamma0": gamma0, "sigma0": sigma0}
        ratio = float(np.min(p0.values[inside] / bound[inside]))
        return {"ok": ratio >= 1.0, "worst_ratio": ratio, "gamma0": gamma0, "sigma0": sigma0}


def _annulus_core_pressure(r: np.ndarray, m: float) -> np.ndarray:
    core = (0.5 + 0.5 * r**2) ** (m - 1.0)
    vals = np.where(r <= 1.0, core, 0.0)
    vals = np.where((r > 1.0) & (r <= 1.5), 1.0, vals)
    vals = np.where((r > 1.5) & (r <= 2.0), 4.0 - 2.0 * r, vals)
    return np.maximum(vals, 0.0)


def _mollify(vals: np.ndarray, radius_cells: int) -> np.ndarray:
    if radius_cells <= 0:
        return vals
    offsets = np.arange(-radius_cells, radius_cells + 1)
    if vals.ndim == 1:
        kernel = (np.abs(offsets) <= radius_cells).astype(float)
    else:
        oi, oj = np.meshgrid(offsets, offsets, indexing="ij")
        kernel = (oi**2 + oj**2 <= radius_cells**2).astype(float)
    kernel /= kernel.sum()
    return ndimage.convolve(vals, kernel, mode="constant", cval=0.0)


# ---------------------------------------------------------------------------
# model spec
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """One problem instance on the box [domain_lo, domain_hi]^dimension."""

    m: float
    dimension: int
    domain_lo: float
    domain_hi: float
    horizon: float
    drift: Drift = field(default_factory=ZeroDrift)
    source: Source = field(default_factory=ZeroSource)
    init: InitialData = field(default_factory=lambda: InitialData("patch"))
    p_max_override: float | None = None
    cd: float = 1.0

    def __post_init__(self):
        if not (self.m == INFINITE_M or self.m > 1.0):
            raise ValueError("m must exceed 1 or be infinite")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if not self.domain_hi > self.domain_lo:
            raise ValueError("domain must have positive volume")
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")

    @property
    def is_limit(self) -> bool:
        return self.m == INFINITE_M

    def with_m(self, m: float) -> "ModelSpec":
        return replace(self, m=m)

    def grid(self, cells_per_axis: int) -> Grid:
        return Grid.from_domain(self.dimension, cells_per_axis, self.domain_lo, self.domain_hi)

    def initial_pressure(self, grid: Grid) -> Field:
        return self.init.pressure(grid, self.m)

    def initial_density(self, grid: Grid) -> Field:
        if self.is_limit:
            return self.init.limit_density(grid)
        return density_from_pressure(self.init.pressure(grid, self.m), self.m)

    def source_values(self, grid_coords, t: float, p: np.ndarray) -> np.ndarray:
        return self.source.value(grid_coords, t, p)

    def drift_components(self, grid_coords, t: float):
        return self.drift.components(grid_coords, t)


# ---------------------------------------------------------------------------
# pressure <-> density
# ---------------------------------------------------------------------------

def pressure_from_density(rho: Field, m: float) -> Field:
    """p = m/(m-1) rho^(m-1); rejects negative cells."""
    if not (np.isfinite(m) and m > 1.0):
        raise ValueError("finite m > 1 required")
    neg = rho.values < 0.0
    if neg.any():
        idx = np.argwhere(neg)[0]
        raise NegativeDensityError(idx, rho.values[tuple(idx)])
    vals = m / (m - 1.0) * rho.values ** (m - 1.0)
    return rho.with_values(vals)


def density_from_pressure(p: Field, m: float) -> Field:
    """Exact inverse of :func:`pressure_from_density` on non-negative fields."""
    if not (np.isfinite(m) and m > 1.0):
        raise ValueError("finite m > 1 required")
    neg = p.values < 0.0
    if neg.any():
        idx = np.argwhere(neg)[0]
        raise NegativeDensityError(idx, p.values[tuple(idx)])
    vals = ((m - 1.0) / m * p.values) ** (1.0 / (m - 1.0))
    return p.with_values(vals)


# ---------------------------------------------------------------------------
# assumption audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AssumptionReport:
    sigma: float
    sigma_tilde: float
    norms: dict
    c0_ab: float | None
    satisfied: dict
    p_max: float
    sample_density: int

    def as_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "sigma_tilde": self.sigma_tilde,
            "norms": dict(self.norms),
            "c0_ab": self.c0_ab,
            "satisfied": dict(self.satisfied),
            "p_max": self.p_max,
            "sample_density": self.sample_density,
        }


def default_p_max(spec: ModelSpec, grid: Grid | None = None, n_sample: int = 64) -> float:
    """Crude safe envelope: sup p0 * exp(sup f_+ * T), overridable per spec."""
    if spec.p_max_override is not None:
        return float(spec.p_max_override)
    g = grid if grid is not None else spec.grid(n_sample)
    if spec.is_limit:
        p0_sup = 1.0
    else:
        p0_sup = linf_norm(spec.initial_pressure(g))
    xs = _sample_axes(spec, n_sample)
    f_plus = _sampled_sup(spec, xs, lambda c, t, p: np.maximum(spec.source.value(c, t, p), 0.0),
                          p_hi=max(p0_sup, 1.0))
    return float(max(p0_sup, 1e-12) * math.exp(f_plus * spec.horizon))


def _sample_axes(spec: ModelSpec, n: int):
    """Endpoint-inclusive lattice; doubling n refines it, so sampled infima
    can only decrease under refinement."""
    return np.linspace(spec.domain_lo, spec.domain_hi, n + 1)


def _sample_coords(spec: ModelSpec, n: int):
    ax = _sample_axes(spec, n)
    if spec.dimension == 1:
        return (ax,)
    X0, X1 = np.meshgrid(ax, ax, indexing="ij")
    return (X0, X1)


def _sampled_sup(spec: ModelSpec, ax, fn, p_hi: float, n_t: int = 8, n_p: int = 8) -> float:
    coords = (ax,) if spec.dimension == 1 else np.meshgrid(ax, ax, indexing="ij")
    out = 0.0
    for t in np.linspace(0.0, spec.horizon, n_t + 1):
        for p in np.linspace(0.0, p_hi, n_p + 1):
            vals = np.asarray(fn(coords, t, p))
            if not np.all(np.isfinite(vals)):
                raise NonFiniteFieldError(f"coefficient non-finite at t={t}, p={p}")
            out = max(out, float(np.max(vals)))
    return out


def audit_assumptions(spec: ModelSpec, sample_density: int = 32) -> AssumptionReport:
    """Sample the standing conditions over domain x [0, T] x [0, 1.5 p_max]."""
    n = int(sample_density)
    coords = _sample_coords(spec, n)
    times = np.linspace(0.0, spec.horizon, 9)
    p_max = default_p_max(spec, None)
    p_samples = np.linspace(0.0, 1.5 * p_max, 17)

    b = spec.drift
    f = spec.source

    b_inf = 0.0
    b_jac = 0.0
    b_second = 0.0
    b_dt_c1 = 0.0
    div_b_inf = 0.0
    sigma = math.inf
    sigma_tilde = math.inf
    f_inf = 0.0
    f_p_inf = 0.0
    f_p_max = -math.inf
    f_xt = 0.0
    f_at_zero = 0.0
    f_plus = 0.0
    f_min_strip = math.inf

    for t in times:
        comps = b.components(coords, t)
        speed = np.sqrt(sum(np.asarray(c) ** 2 for c in comps))
        if not np.all(np.isfinite(speed)):
            raise NonFiniteFieldError(f"drift non-finite at t={t}")
        b_inf = max(b_inf, float(np.max(speed)))
        b_jac = max(b_jac, float(np.max(b.jacobian_frobenius(coords, t))))
        b_second = max(b_second, float(np.max(b.second_derivative_norm(coords, t))))
        b_dt_c1 = max(b_dt_c1, float(np.max(b.time_derivative_c1(coords, t))))
        div_b = np.asarray(b.divergence(coords, t))
        div_b_inf = max(div_b_inf, float(np.max(np.abs(div_b))))
        fz = np.asarray(f.value(coords, t, 0.0))
        f_at_zero = max(f_at_zero, float(np.max(np.abs(fz))))
        for p in p_samples:
            fv = np.asarray(f.value(coords, t, p))
            if not np.all(np.isfinite(fv)):
                raise NonFiniteFieldError(f"source non-finite at t={t}, p={p}")
            fp = np.asarray(f.dp(coords, t, p))
            sigma = min(sigma, float(np.min(div_b + fv - fp * p)))
            sigma_tilde = min(sigma_tilde, float(np.min(div_b + fv)))
            f_plus = max(f_plus, float(np.max(np.maximum(fv, 0.0))))
            if p <= p_max:
                f_inf = max(f_inf, float(np.max(np.abs(fv))))
                f_p_inf = max(f_p_inf, float(np.max(np.abs(fp))))
                f_p_max = max(f_p_max, float(np.max(fp)))
                f_xt = max(f_xt, float(np.max(f.space_time_gradient_norm(coords, t, p))))
                f_min_strip = min(f_min_strip, float(np.min(fv)))

    b_c21 = b_inf + b_jac + b_second + b_dt_c1
    norms = {
        "b_inf": b_inf,
        "div_b_inf": div_b_inf,
        "b_c21": b_c21,
        "f_c1dot_xt": f_xt,
        "f_at_zero_inf": f_at_zero,
        "f_plus_inf": f_plus,
        "f_p_inf": f_p_inf,
        "f_inf": f_inf,
    }

    bounds_finite = all(np.isfinite(v) for v in norms.values())
    cond_ok = sigma > 0.0
    h2_ok = sigma_tilde > 0.0 and f_p_max <= 0.0
    # alternative interior-floor route: no drift and a p-only source with
    # f >= 0 and f_p <= 0 on the sampled pressure strip
    alt_ok = b.is_zero and f.p_only and f_min_strip >= 0.0 and f_p_max <= 0.0

    r11_ok = _r11_check(spec)

    c0 = None
    if cond_ok:
        c0 = spec.cd * (1.0 + 1.0 / sigma) * (1.0 + p_max) * (1.0 + f_p_inf) * (
            1.0 + b_c21**2 + f_xt**2 + f_inf
        )
    elif alt_ok:
        c0 = spec.cd * 2.0 * (1.0 + f_p_inf) * p_max

    satisfied = {
        "bounds_finite": bool(bounds_finite),
        "cond": bool(cond_ok),
        "h2": bool(h2_ok),
        "alt_floor_route": bool(alt_ok),
        "r11": bool(r11_ok),
        "ab_available": bool(cond_ok or alt_ok),
    }
    return AssumptionReport(
        sigma=sigma,
        sigma_tilde=sigma_tilde,
        norms=norms,
        c0_ab=c0,
        satisfied=satisfied,
        p_max=p_max,
        sample_density=n,
    )


def _r11_check(spec: ModelSpec, cells: int = 64, tol: float = 1e-9) -> bool:
    """Discrete initial semi-convexity: lap p0 + div b(.,0) + f(.,0,p0) >= 0."""
    if spec.is_limit:
        return False
    g = spec.grid(max(cells, 16))
    try:
        p0 = spec.initial_pressure(g)
    except ValueError:
        return False
    q = laplacian(p0).values
    coords = g.meshgrid()
    q = q + spec.drift.divergence(coords, 0.0) + spec.source.value(coords, 0.0, p0.values)
    scale = 1.0 + float(np.max(np.abs(q)))
    return bool(np.min(q) >= -tol * scale)


def ab_constant(spec: ModelSpec, p_max: float, audit: AssumptionReport | None = None) -> float:
    """Interior floor constant of the semi-convexity bound.

    Under the sampled positivity condition sigma > 0 this is the product
    C_d (1 + 1/sigma) (1 + p_max) (1 + sup|f_p|)
    (1 + |b|_C21^2 + |f|_C1(x,t)^2 + |f|_inf), with the f-norms taken over
    pressures in [0, p_max].  Without drift and with a p-only source that
    stays non-negative and non-increasing, the fallback constant
    2 (1 + sup|f_p|) p_max applies.
    """
    rep = audit if audit is not None else audit_assumptions(spec)
    if rep.satisfied["cond"]:
        n = rep.norms
        return spec.cd * (1.0 + 1.0 / rep.sigma) * (1.0 + p_max) * (1.0 + n["f_p_inf"]) * (
            1.0 + n["b_c21"] ** 2 + n["f_c1dot_xt"] ** 2 + n["f_inf"]
        )
    if rep.satisfied["alt_floor_route"]:
        return spec.cd * 2.0 * (1.0 + rep.norms["f_p_inf"]) * p_max
    raise UnsupportedRegimeError(
        "interior floor constant needs sigma > 0 or a drift-free non-increasing p-only source"
    )


# ---------------------------------------------------------------------------
# support envelope
# ---------------------------------------------------------------------------

def barrier_rate(spec: ModelSpec, audit: AssumptionReport | None = None) -> float:
    rep = audit if audit is not None else audit_assumptions(spec)
    return max(1.0, (rep.norms["div_b_inf"] + rep.norms["f_plus_inf"]) / spec.dimension)


def barrier_initial_radius(spec: ModelSpec, grid: Grid, audit: AssumptionReport | None = None) -> float:
    """Smallest R with (C/2)(R^2 - |x|^2) >= p0 on the grid."""
    C = barrier_rate(spec, audit)
    if spec.is_limit:
        p0 = spec.init.limit_density(grid).values  # density <= 1 bounds p0 support; use support radius instead
        vals = np.where(p0 > 0.0, 1.0, 0.0)
    else:
        vals = spec.initial_pressure(grid).values
    coords = grid.meshgrid()
    r2 = sum(c**2 for c in coords)
    supp = vals > 0.0
    if not supp.any():
        return 0.0
    if spec.is_limit:
        return float(np.sqrt(np.max(r2[supp]))) + grid.dx
    return float(np.sqrt(np.max(r2[supp] + 2.0 * vals[supp] / C)))


def theoretical_support_radius(
    spec: ModelSpec, t: float, grid: Grid, audit: AssumptionReport | None = None
) -> float:
    """Envelope R(t) = e^(C t) R(0) + (|b|_inf / C)(e^(C t) - 1).

    Solves R' = C R + |b|_inf from the barrier comparison; the support of
    the pressure stays inside B_R(t) for every exponent.
    """
    rep = audit if audit is not None else audit_assumptions(spec)
    C = barrier_rate(spec, rep)
    r0 = barrier_initial_radius(spec, grid, rep)
    growth = math.exp(C * t)
    return growth * r0 + rep.norms["b_inf"] / C * (growth - 1.0)
