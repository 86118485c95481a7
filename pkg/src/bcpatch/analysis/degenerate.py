"""The degenerate equation div(b^2 grad w) = b^(1-s) f(w) w, b the eps = 1 barrier.

With Phi(y) = phi_eps(sqrt(eps) y)/eps and w = Phi/b - 1 the steady
equation becomes this divergence-form problem in y.  Both sides are
evaluated with the conservative five-point stencil, face weights b^2
taken analytically at face midpoints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..barrier import AngularProfile, eval_barrier
from ..errors import DomainError
from ..grid import SymmetricField, interpolate
from ..steady import sandwich_radius

W_SMALL = 1e-12


def f_w(w, s: float):
    """((1+w)^(1+s) - 1)/((1+w)^s w), with the limit 1+s for |w| <= 1e-12."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= -1):
        raise DomainError("f(w) needs w > -1")
    small = np.abs(w) <= W_SMALL
    ws = np.where(small, 1.0, w)
    lg = np.log1p(ws)
    out = np.expm1((1 + s) * lg) / (ws * np.exp(s * lg))
    out = np.where(small, 1.0 + s, out)
    return float(out) if out.ndim == 0 else out


def _weights(profile: AngularProfile, y1, y2):
    b = eval_barrier(profile, 1.0, np.abs(y1), np.abs(y2))
    return b * b


def divergence_form(w_at, profile: AngularProfile, y1, y2, h: float):
    """Conservative five-point div(b^2 grad w) at points (y1, y2), step h.

    ``w_at(a, b)`` returns w at arbitrary points; for nodal data pass a
    lookup.  Face weights are exact barrier values at the face midpoints.
    """
    w0 = w_at(y1, y2)
    out = np.zeros_like(np.asarray(w0, dtype=float))
    for d1, d2 in ((h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)):
        a = _weights(profile, y1 + 0.5 * d1, y2 + 0.5 * d2)
        out = out + a * (w_at(y1 + d1, y2 + d2) - w0)
    return out / (h * h)


@dataclass(frozen=True, eq=False)
class RescaledRatio:
    """w = Phi/b - 1 on the y-grid y = x/sqrt(eps), NaN off the valid set."""
    w: np.ndarray
    h: float
    eps: float
    s: float
    radius: float

    @property
    def n(self) -> int:
        return self.w.shape[0] - 1

    def coords(self):
        y = np.arange(self.n + 1) * self.h
        return np.meshgrid(y, y, indexing="ij")


def rescale(phi: SymmetricField, profile: AngularProfile, eps: float) -> RescaledRatio:
    """Phi(y) = phi(sqrt(eps) y)/eps divided by the eps = 1 barrier, minus 1.

    Equivalent to phi/barrier_eps - 1 at the same nodes; the region
    radius becomes 1/(-ln eps) in y units.
    """
    grid = phi.grid
    root = np.sqrt(eps)
    x1, x2 = grid.mesh()
    y1, y2 = x1 / root, x2 / root
    b = eval_barrier(profile, 1.0, y1, y2)
    off = (x1 > 0) & (x2 > 0) & (x1 < 0.5) & (x2 < 0.5)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(off, (phi.values / eps) / np.where(off, b, 1.0) - 1.0, np.nan)
    return RescaledRatio(w, grid.h / root, float(eps), profile.s, sandwich_radius(eps) / root)


def degenerate_residual(w: RescaledRatio, profile: AngularProfile, r_lo=None, r_hi=None) -> dict:
    """Normalized sup of |div(b^2 grad w) - b^(1-s) f(w) w| on nodes with r in [16h, R].

    Nodes whose stencil touches an undefined value are skipped.  The
    deviation is divided by the sup of the right-hand side over the same
    nodes.  Also reports the range of f(w) over the sampled nodes.
    """
    if abs(profile.s - w.s) > 1e-15:
        raise DomainError("profile and field use different s")
    h = w.h
    r_lo = 16 * h if r_lo is None else r_lo
    r_hi = w.radius if r_hi is None else r_hi
    vals = w.w
    n = w.n
    y1, y2 = w.coords()
    r = np.hypot(y1, y2)
    i = np.arange(1, n)
    I, J = np.meshgrid(i, i, indexing="ij")
    sel = (r[1:-1, 1:-1] >= r_lo) & (r[1:-1, 1:-1] <= r_hi)
    stencil = (np.isfinite(vals[1:-1, 1:-1]) & np.isfinite(vals[2:, 1:-1]) & np.isfinite(vals[:-2, 1:-1])
               & np.isfinite(vals[1:-1, 2:]) & np.isfinite(vals[1:-1, :-2]))
    sel &= stencil
    if not np.any(sel):
        raise DomainError("no nodes in the requested annulus")
    I, J = I[sel], J[sel]

    def lookup(a, b):
        return vals[np.rint(a / h).astype(int), np.rint(b / h).astype(int)]

    lhs = divergence_form(lookup, profile, I * h, J * h, h)
    wv = vals[I, J]
    b = eval_barrier(profile, 1.0, I * h, J * h)
    fv = f_w(wv, w.s)
    rhs = b ** (1 - w.s) * fv * wv
    scale = float(np.max(np.abs(rhs)))
    dev = float(np.max(np.abs(lhs - rhs)))
    return {
        "residual": dev / scale if scale > 0 else dev,
        "max_deviation": dev,
        "rhs_scale": scale,
        "nodes": int(sel.sum()),
        "annulus": [float(r_lo), float(r_hi)],
        "f_min": float(np.min(fv)),
        "f_max": float(np.max(fv)),
        "w_min": float(np.min(wv)),
        "w_max": float(np.max(wv)),
    }


def ratio_callable(w: RescaledRatio):
    """Bicubic interpolant of the rescaled ratio as a function of y."""
    if not np.all(np.isfinite(w.w[1:-1, 1:-1])):
        raise DomainError("ratio has undefined interior values")
    # the ratio is even across both axes; the axis rows are filled by extrapolation
    vals = np.array(w.w)
    vals[0, :] = 2 * vals[1, :] - vals[2, :]
    vals[:, 0] = 2 * vals[:, 1] - vals[:, 2]
    vals[-1, :] = 2 * vals[-2, :] - vals[-3, :]
    vals[:, -1] = 2 * vals[:, -2] - vals[:, -3]
    L = w.n * w.h

    def call(y1, y2):
        return interpolate(vals, np.asarray(y1) / (2 * L), np.asarray(y2) / (2 * L), parity=(1, 1))

    return call


def quotient(w_at, profile: AngularProfile, y1, y2, h: float):
    """div(b^2 grad w)/(b^(1-s) w) at the given points by the conservative stencil."""
    num = divergence_form(w_at, profile, y1, y2, h)
    den = eval_barrier(profile, 1.0, y1, y2) ** (1 - profile.s) * w_at(y1, y2)
    return num / den


def scaling_invariance_check(w_at, R_scale: float, profile: AngularProfile, h: float = 1e-3,
                             r_range=(0.05, 0.5), n_r: int = 24, n_theta: int = 16,
                             theta_margin: float = 0.0) -> float:
    """Sup relative mismatch between the quotient of w at x = R y and of w_R(y) = w(R y) at y.

    The quotient is invariant under this rescaling because b is
    homogeneous of degree 2/(1+s).  Both sides use step h, so the
    mismatch measures the stencil's truncation error.  Points y have
    |y| in ``r_range`` and angles in the open quarter, kept
    ``theta_margin`` away from both axes.  Gridded data need a margin: next
    to the axes the ratio is only known through extrapolation.
    """
    if not 0 < R_scale:
        raise DomainError("R_scale must be positive")
    rr = np.geomspace(r_range[0], r_range[1], n_r)
    span = 0.5 * np.pi - 2 * theta_margin
    if span <= 0:
        raise DomainError("theta_margin leaves no angles")
    tt = theta_margin + (np.arange(n_theta) + 0.5) * (span / n_theta)
    R, T = np.meshgrid(rr, tt, indexing="ij")
    y1, y2 = R * np.cos(T), R * np.sin(T)

    def w_R(a, b):
        return w_at(R_scale * a, R_scale * b)

    q_scaled = quotient(w_R, profile, y1, y2, h)
    q_direct = quotient(w_at, profile, R_scale * y1, R_scale * y2, h)
    ref = float(np.max(np.abs(q_direct)))
    dev = float(np.max(np.abs(q_scaled - q_direct)))
    return dev / ref if ref > 0 else dev
