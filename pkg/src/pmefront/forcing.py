"""Closed enumeration of drift fields b(x, t) and growth rates f(x, t, p).

Every kind carries its own analytic derivatives so the assumption audit can
sample exact quantities instead of differentiating numerically.  Arbitrary
user callables are deliberately not supported.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Coords = "tuple of per-axis coordinate arrays"


def _zeros_like_coords(xs):
    return np.zeros(np.broadcast(*xs).shape) if len(xs) > 1 else np.zeros_like(xs[0])


# ---------------------------------------------------------------------------
# drift fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Drift:
    """Base drift; subclasses fill in the analytic pieces."""

    kind = "zero"
    time_independent = True

    def components(self, xs, t: float) -> tuple[np.ndarray, ...]:
        return tuple(np.zeros_like(x) for x in xs)

    def divergence(self, xs, t: float) -> np.ndarray:
        return _zeros_like_coords(xs)

    def jacobian_frobenius(self, xs, t: float) -> np.ndarray:
        return _zeros_like_coords(xs)

    def second_derivative_norm(self, xs, t: float) -> np.ndarray:
        return _zeros_like_coords(xs)

    def time_derivative_c1(self, xs, t: float) -> np.ndarray:
        return _zeros_like_coords(xs)

    @property
    def is_zero(self) -> bool:
        return False

    def at_points(self, pts: np.ndarray, t: float) -> np.ndarray:
        """Evaluate at an (N, d) point array; returns (N, d)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        xs = tuple(pts[:, k] for k in range(pts.shape[1]))
        return np.stack(self.components(xs, t), axis=-1)

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class ZeroDrift(Drift):
    kind = "zero"

    @property
    def is_zero(self) -> bool:
        return True


@dataclass(frozen=True)
class ConstantDrift(Drift):
    velocity: tuple[float, ...] = (0.0,)
    kind = "constant"

    def components(self, xs, t):
        return tuple(np.full_like(xs[k], self.velocity[k]) for k in range(len(xs)))

    @property
    def is_zero(self):
        return all(v == 0.0 for v in self.velocity)

    def params(self):
        return {"velocity": list(self.velocity)}


@dataclass(frozen=True)
class RotationDrift(Drift):
    """b = omega * (-(x1 - c1), (x0 - c0)); divergence free, |grad b|_F = omega sqrt(2)."""

    omega: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    kind = "rotation"

    def components(self, xs, t):
        x0, x1 = xs
        return (-self.omega * (x1 - self.center[1]), self.omega * (x0 - self.center[0]))

    def jacobian_frobenius(self, xs, t):
        return np.full_like(np.broadcast_arrays(*xs)[0], abs(self.omega) * np.sqrt(2.0))

    @property
    def is_zero(self):
        return self.omega == 0.0

    def params(self):
        return {"omega": self.omega, "center": list(self.center)}


@dataclass(frozen=True)
class ShearDrift(Drift):
    """b = (rate * x1, 0); divergence free."""

    rate: float = 1.0
    kind = "shear"

    def components(self, xs, t):
        x0, x1 = xs
        return (self.rate * x1, np.zeros_like(x0))

    def jacobian_frobenius(self, xs, t):
        return np.full_like(np.broadcast_arrays(*xs)[0], abs(self.rate))

    @property
    def is_zero(self):
        return self.rate == 0.0

    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class PotentialDrift(Drift):
    """b = grad Phi for the quadratic well Phi = (strength/2) |x - center|^2."""

    strength: float = 1.0
    center: tuple[float, ...] = (0.0,)
    kind = "gradient_of_potential"

    def components(self, xs, t):
        return tuple(self.strength * (xs[k] - self.center[k]) for k in range(len(xs)))

    def divergence(self, xs, t):
        return np.full_like(np.broadcast_arrays(*xs)[0], self.strength * len(xs))

    def jacobian_frobenius(self, xs, t):
        return np.full_like(np.broadcast_arrays(*xs)[0], abs(self.strength) * np.sqrt(len(xs)))

    @property
    def is_zero(self):
        return self.strength == 0.0

    def params(self):
        return {"strength": self.strength, "center": list(self.center)}


# ---------------------------------------------------------------------------
# source terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Source:
    """Base growth rate f(x, t, p)."""

    kind = "zero"
    time_independent = True

    def value(self, xs, t: float, p) -> np.ndarray:
        return _zeros_like_coords(xs)

    def dp(self, xs, t: float, p) -> np.ndarray:
        return _zeros_like_coords(xs)

    def space_time_gradient_norm(self, xs, t: float, p) -> np.ndarray:
        """|grad_x f| + |df/dt| pointwise."""
        return _zeros_like_coords(xs)

    @property
    def is_zero(self) -> bool:
        return False

    @property
    def p_only(self) -> bool:
        """True when f depends on the pressure alone (or on nothing)."""
        return False

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class ZeroSource(Source):
    kind = "zero"

    @property
    def is_zero(self):
        return True

    @property
    def p_only(self):
        return True


@dataclass(frozen=True)
class ConstantSource(Source):
    rate: float = 1.0
    kind = "constant"

    def value(self, xs, t, p):
        return np.full_like(_zeros_like_coords(xs), self.rate)

    @property
    def is_zero(self):
        return self.rate == 0.0

    @property
    def p_only(self):
        return True

    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class LogisticSource(Source):
    """Pressure-limited growth f = cap - slope * p with slope >= 0."""

    cap: float = 2.0
    slope: float = 1.0
    kind = "logistic"

    def value(self, xs, t, p):
        return self.cap - self.slope * np.asarray(p) + _zeros_like_coords(xs)

    def dp(self, xs, t, p):
        return np.full_like(_zeros_like_coords(xs), -self.slope)

    @property
    def is_zero(self):
        return self.cap == 0.0 and self.slope == 0.0

    @property
    def p_only(self):
        return True

    def params(self):
        return {"cap": self.cap, "slope": self.slope}


@dataclass(frozen=True)
class PolynomialSource(Source):
    """f = a0 + sum_k ax[k] x_k + at * t + ap * p (first order in each slot)."""

    a0: float = 1.0
    ax: tuple[float, ...] = ()
    at: float = 0.0
    ap: float = 0.0
    kind = "polynomial"
    time_independent = False

    def value(self, xs, t, p):
        out = np.full_like(_zeros_like_coords(xs), self.a0 + self.at * t)
        for k, c in enumerate(self.ax):
            out = out + c * xs[k]
        return out + self.ap * np.asarray(p)

    def dp(self, xs, t, p):
        return np.full_like(_zeros_like_coords(xs), self.ap)

    def space_time_gradient_norm(self, xs, t, p):
        gx = np.sqrt(sum(c * c for c in self.ax)) if self.ax else 0.0
        return np.full_like(_zeros_like_coords(xs), gx + abs(self.at))

    @property
    def is_zero(self):
        return self.a0 == 0.0 and self.at == 0.0 and self.ap == 0.0 and not any(self.ax)

    @property
    def p_only(self):
        return not self.ax and self.at == 0.0

    def params(self):
        return {"a0": self.a0, "ax": list(self.ax), "at": self.at, "ap": self.ap}


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

def _reject_leftovers(kind, params):
    if params:
        raise ValueError(f"unknown parameter(s) for {kind!r}: {sorted(params)}")


def drift_from_config(kind: str, params: dict, dimension: int) -> Drift:
    params = dict(params or {})
    if kind == "zero":
        _reject_leftovers(kind, params)
        return ZeroDrift()
    if kind == "constant":
        v = params.pop("velocity", [0.0] * dimension)
        _reject_leftovers(kind, params)
        if len(v) != dimension:
            raise ValueError("constant drift velocity length must match dimension")
        return ConstantDrift(tuple(float(c) for c in v))
    if kind == "rotation":
        if dimension != 2:
            raise ValueError("rotation drift needs dimension 2")
        center = tuple(float(c) for c in params.pop("center", (0.0, 0.0)))
        omega = float(params.pop("omega", 1.0))
        _reject_leftovers(kind, params)
        return RotationDrift(omega, center)
    if kind == "shear":
        if dimension != 2:
            raise ValueError("shear drift needs dimension 2")
        rate = float(params.pop("rate", 1.0))
        _reject_leftovers(kind, params)
        return ShearDrift(rate)
    if kind == "gradient_of_potential":
        center = tuple(float(c) for c in params.pop("center", (0.0,) * dimension))
        strength = float(params.pop("strength", 1.0))
        _reject_leftovers(kind, params)
        if len(center) != dimension:
            raise ValueError("potential center length must match dimension")
        return PotentialDrift(strength, center)
    raise ValueError(f"unknown drift kind {kind!r}")


def source_from_config(kind: str, params: dict) -> Source:
    params = dict(params or {})
    if kind == "zero":
        _reject_leftovers(kind, params)
        return ZeroSource()
    if kind == "constant":
        rate = float(params.pop("rate", 1.0))
        _reject_leftovers(kind, params)
        return ConstantSource(rate)
    if kind == "logistic":
        cap = float(params.pop("cap", 2.0))
        slope = float(params.pop("slope", 1.0))
        _reject_leftovers(kind, params)
        return LogisticSource(cap, slope)
    if kind == "polynomial":
        a0 = float(params.pop("a0", 1.0))
        ax = tuple(float(c) for c in params.pop("ax", ()))
        at = float(params.pop("at", 0.0))
        ap = float(params.pop("ap", 0.0))
        _reject_leftovers(kind, params)
        return PolynomialSource(a0, ax, at, ap)
    raise ValueError(f"unknown source kind {kind!r}")
