"""Sandwich barrier <= phi <= eps near the corner, and the ratio W = phi/barrier - 1."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..barrier import AngularProfile, barrier_values
from ..errors import DomainError, ResolutionError
from ..grid import QuarterGrid, SymmetricField, trapezoid_weights
from ..steady import grid_resolves, sandwich_radius

SCHEMA_VERSION = 1


def _barrier_array(barrier, eps, grid: QuarterGrid) -> np.ndarray:
    if isinstance(barrier, AngularProfile):
        return barrier_values(barrier, eps, grid)
    vals = barrier.values if isinstance(barrier, SymmetricField) else np.asarray(barrier, dtype=float)
    if vals.shape != grid.shape:
        raise DomainError(f"barrier shape {vals.shape} does not match grid {grid.shape}")
    return vals


@dataclass
class SandwichReport:
    eps: float
    n: int
    radius: float
    nodes: int
    tolerance: float
    lower_margin: float
    lower_location: tuple
    upper_margin: float
    upper_location: tuple
    lower_violations: int
    upper_violations: int

    @property
    def lower_ok(self) -> bool:
        return self.lower_margin >= -self.tolerance

    @property
    def upper_ok(self) -> bool:
        return self.upper_margin >= -self.tolerance

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "eps": self.eps, "n": self.n, "radius": self.radius, "nodes": self.nodes,
            "tolerance": self.tolerance,
            "lower_margin": self.lower_margin, "lower_location": list(self.lower_location),
            "lower_violations": self.lower_violations, "lower_ok": self.lower_ok,
            "upper_margin": self.upper_margin, "upper_location": list(self.upper_location),
            "upper_violations": self.upper_violations, "upper_ok": self.upper_ok,
            "pass": self.passed,
        }


def sandwich_check(phi: SymmetricField, barrier, eps: float, rel_tol: float = 1e-8) -> SandwichReport:
    """Check barrier <= phi <= eps at every node with |x| <= sqrt(eps)/(-ln eps).

    ``barrier`` is a profile (evaluated at ``eps``) or an array of node
    values.  Margins are min(phi - barrier) and min(eps - phi).
    """
    grid = phi.grid
    if not grid_resolves(eps, grid.n):
        raise ResolutionError(
            f"sandwich radius {sandwich_radius(eps) if 0 < eps < 1 else float('nan'):.4g} "
            f"is below 20h = {20 * grid.h:.4g}",
            eps=eps, n=grid.n,
        )
    R = sandwich_radius(eps)
    b = _barrier_array(barrier, eps, grid)
    x1, x2 = grid.mesh()
    region = np.hypot(x1, x2) <= R
    v = phi.values
    lower = np.where(region, v - b, np.inf)
    upper = np.where(region, eps - v, np.inf)
    tol = rel_tol * eps
    il = np.unravel_index(np.argmin(lower), lower.shape)
    iu = np.unravel_index(np.argmin(upper), upper.shape)
    return SandwichReport(
        eps=float(eps), n=grid.n, radius=R, nodes=int(region.sum()), tolerance=tol,
        lower_margin=float(lower[il]), lower_location=(float(x1[il]), float(x2[il])),
        upper_margin=float(upper[iu]), upper_location=(float(x1[iu]), float(x2[iu])),
        lower_violations=int(np.sum(lower < -tol)), upper_violations=int(np.sum(upper < -tol)),
    )


@dataclass(frozen=True, eq=False)
class RatioField:
    """W = phi/barrier - 1 on the quarter nodes, NaN where masked."""
    grid: QuarterGrid
    W: np.ndarray
    mask: np.ndarray
    r_min: float

    @property
    def values(self) -> np.ndarray:
        return self.W


def ratio_field(phi: SymmetricField, barrier, eps: float, r_min: float | None = None) -> RatioField:
    """Pointwise ratio off the edges for r >= r_min; masked nodes hold NaN."""
    grid = phi.grid
    r_min = 4 * grid.h if r_min is None else float(r_min)
    if r_min < 4 * grid.h * (1 - 1e-12):
        raise DomainError(f"r_min must be at least 4h = {4 * grid.h}")
    b = _barrier_array(barrier, eps, grid)
    x1, x2 = grid.mesh()
    mask = (np.hypot(x1, x2) < r_min) | (x1 == 0) | (x2 == 0) | (x1 == 0.5) | (x2 == 0.5)
    if np.any(b[~mask] == 0):
        raise DomainError("barrier vanishes at an unmasked node")
    with np.errstate(divide="ignore", invalid="ignore"):
        W = np.where(mask, np.nan, phi.values / np.where(mask, 1.0, b) - 1.0)
    W.setflags(write=False)
    return RatioField(grid, W, mask, r_min)


def ratio_l2_check(phi: SymmetricField, profile: AngularProfile, eps: float) -> dict:
    """Integral of (phi/barrier)^2 over the quarter with an analytic tail for r < 4h.

    Off the axes the trapezoid rule is applied to nodes with r >= 4h.  Inside
    r < 4h the bound (phi/barrier)^2 <= C^2 r^(-2 alpha), alpha = (1-s)/(1+s),
    is integrated exactly, with C fitted on the annulus 4h <= r <= 8h.
    """
    grid = phi.grid
    h = grid.h
    s = profile.s
    alpha = (1 - s) / (1 + s)
    b = barrier_values(profile, eps, grid)
    x1, x2 = grid.mesh()
    r = np.hypot(x1, x2)
    off = (x1 > 0) & (x2 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(off, phi.values / np.where(off, b, 1.0), 0.0)
    w = trapezoid_weights(grid.n)
    weight = np.outer(w, w)
    keep = off & (r >= 4 * h)
    bulk = float(np.sum(weight[keep] * q[keep] ** 2))
    ring = off & (r >= 4 * h) & (r <= 8 * h)
    C = float(np.max(np.abs(q[ring]) * r[ring] ** alpha))
    R0 = 4 * h
    tail = 0.5 * np.pi * C * C * R0 ** (2 - 2 * alpha) / (2 - 2 * alpha)
    return {
        "schema_version": SCHEMA_VERSION,
        "eps": float(eps), "n": grid.n,
        "integral": bulk + tail, "bulk": bulk, "tail": float(tail), "tail_constant": C,
    }
