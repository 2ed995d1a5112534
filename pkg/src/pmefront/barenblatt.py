"""Closed-form self-similar source solution of the porous medium equation.

For the pure equation (no drift, no source) the density

    rho(x, t) = t^(-alpha) * (C - kappa |x|^2 t^(-2 beta))_+^(1/(m-1))

with alpha = d / (d (m - 1) + 2), beta = alpha / d and
kappa = alpha (m - 1) / (2 d m) is an exact solution for t > 0.  It is the
standard benchmark: compactly supported, front at radius
R(t) = sqrt(C / kappa) t^beta, and its pressure is exactly quadratic inside
the support.
"""
from __future__ import annotations

import numpy as np

from .grids import Field, Grid


def exponents(m: float, d: int) -> tuple[float, float, float]:
    """Return (alpha, beta, kappa) of the self-similar profile."""
    if not m > 1:
        raise ValueError("m must exceed 1")
    alpha = d / (d * (m - 1.0) + 2.0)
    beta = alpha / d
    kappa = alpha * (m - 1.0) / (2.0 * d * m)
    return alpha, beta, kappa


def density_values(r2: np.ndarray, t: float, m: float, d: int, C: float) -> np.ndarray:
    """Density at squared radius ``r2`` and absolute time ``t > 0``."""
    alpha, beta, kappa = exponents(m, d)
    core = np.maximum(C - kappa * r2 * t ** (-2.0 * beta), 0.0)
    return t ** (-alpha) * core ** (1.0 / (m - 1.0))


def pressure_values(r2: np.ndarray, t: float, m: float, d: int, C: float) -> np.ndarray:
    """Pressure m/(m-1) rho^(m-1); quadratic in |x| inside the support."""
    alpha, beta, kappa = exponents(m, d)
    core = np.maximum(C - kappa * r2 * t ** (-2.0 * beta), 0.0)
    return m / (m - 1.0) * t ** (-alpha * (m - 1.0)) * core


def support_radius(t: float, m: float, d: int, C: float) -> float:
    _, beta, kappa = exponents(m, d)
    return float(np.sqrt(C / kappa) * t**beta)


def _r2_on_grid(grid: Grid, center) -> np.ndarray:
    coords = grid.meshgrid()
    center = np.zeros(grid.dimension) if center is None else np.asarray(center, dtype=float)
    r2 = np.zeros(grid.shape)
    for k in range(grid.dimension):
        r2 += (coords[k] - center[k]) ** 2
    return r2


def density_field(grid: Grid, t: float, m: float, C: float, center=None) -> Field:
    return Field(grid, density_values(_r2_on_grid(grid, center), t, m, grid.dimension, C), 0.0)


def pressure_field(grid: Grid, t: float, m: float, C: float, center=None) -> Field:
    return Field(grid, pressure_values(_r2_on_grid(grid, center), t, m, grid.dimension, C), 0.0)
