"""Empirical constants of the weighted inequalities for div(b^2 grad w), b the eps = 1 barrier.

Every trial draws a test function from a seeded ensemble on the node grid
y = (i, j)/N of the quarter disc and records the ratio that the
corresponding inequality bounds.  Integrals are node sums with cell
area h^2; b is evaluated analytically.

Ensembles:

- sobolev_h1, sobolev_w11: w = bump * trigonometric sum with analytic
  gradient, supported in a random disc inside B_1
- caccioppoli, linf_rescale: discrete subsolutions, w = u - min u where
  div(b^2 grad u) = rho >= 0 on the five-point conservative stencil with
  positive Dirichlet data on the arc; the axes carry the natural condition
  because b vanishes there
- isoperimetric: a random trigonometric sum rescaled by its weighted
  delta and 1-delta quantiles, so the sets {w <= 0} and {w >= 1} each
  carry at least a fraction delta of the weighted mass
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..barrier import AngularProfile, eval_barrier, solve_profile
from ..errors import ConstructionError, DomainError
from .sandwich import SCHEMA_VERSION

LAB_IDS = ("caccioppoli", "sobolev_h1", "sobolev_w11", "isoperimetric", "linf_rescale")
STABILITY_TRIALS = 10


@dataclass
class InequalityReport:
    id: str
    trials: int
    empirical_constant: float
    stability_factor: float | None
    seed: int
    grid: int
    s: float
    ratios_finite: bool
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id, "trials": self.trials, "empirical_constant": self.empirical_constant,
            "stability_factor": self.stability_factor, "seed": self.seed, "grid": self.grid,
            "s": self.s, "ratios_finite": self.ratios_finite, "details": self.details,
        }


class LabGrid:
    """Nodes (i, j) h of the closed quarter disc of radius R, h = 1/N."""

    def __init__(self, N: int, profile: AngularProfile, R: float = 1.0):
        if N < 8:
            raise DomainError("lab grid needs N >= 8")
        self.N, self.R, self.profile = int(N), float(R), profile
        self.h = 1.0 / N
        m = int(np.ceil(R * N)) + 1
        y = np.arange(m + 1) * self.h
        self.y1, self.y2 = np.meshgrid(y, y, indexing="ij")
        self.r = np.hypot(self.y1, self.y2)
        self.inside = self.r < R
        self.b = eval_barrier(profile, 1.0, self.y1, self.y2)

    def integral(self, f) -> float:
        return float(np.sum(np.where(self.inside, f, 0.0)) * self.h * self.h)

    def face_weights(self):
        """b^2 at the midpoints of the x1-faces (i+1/2, j) and x2-faces (i, j+1/2)."""
        h = self.h
        a1 = eval_barrier(self.profile, 1.0, self.y1[:-1, :] + 0.5 * h, self.y2[:-1, :]) ** 2
        a2 = eval_barrier(self.profile, 1.0, self.y1[:, :-1], self.y2[:, :-1] + 0.5 * h) ** 2
        return a1, a2

    def dirichlet_form(self, u) -> float:
        """Sum over faces with both ends in the closed disc of b^2 (du)^2."""
        a1, a2 = self.face_weights()
        ok = self.r <= self.R
        e1 = ok[:-1, :] & ok[1:, :]
        e2 = ok[:, :-1] & ok[:, 1:]
        du1 = np.diff(u, axis=0)
        du2 = np.diff(u, axis=1)
        return float(np.sum(np.where(e1, a1 * du1 ** 2, 0.0)) + np.sum(np.where(e2, a2 * du2 ** 2, 0.0)))

    def weighted_face_form(self, w, eta) -> float:
        """Sum of b^2 wbar^2 (d eta)^2 over faces, wbar the face average of w."""
        a1, a2 = self.face_weights()
        ok = self.r <= self.R
        e1 = ok[:-1, :] & ok[1:, :]
        e2 = ok[:, :-1] & ok[:, 1:]
        w1 = 0.5 * (w[:-1, :] + w[1:, :])
        w2 = 0.5 * (w[:, :-1] + w[:, 1:])
        t1 = a1 * w1 ** 2 * np.diff(eta, axis=0) ** 2
        t2 = a2 * w2 ** 2 * np.diff(eta, axis=1) ** 2
        return float(np.sum(np.where(e1, t1, 0.0)) + np.sum(np.where(e2, t2, 0.0)))


class SubsolutionSolver:
    """Sparse LU of the weighted five-point operator on the open disc nodes.

    Unknowns are the nodes with r < R except the corner, which touches
    only faces on the axes where the weight vanishes.  Nodes with r >= R
    next to an unknown take the Dirichlet data.
    """

    def __init__(self, grid: LabGrid):
        self.grid = grid
        g = grid
        unknown = g.inside.copy()
        unknown[0, 0] = False
        self.unknown = unknown
        idx = -np.ones(unknown.shape, dtype=np.int64)
        idx[unknown] = np.arange(int(unknown.sum()))
        self.idx = idx
        a1, a2 = g.face_weights()
        m = unknown.shape[0]
        rows, cols, vals = [], [], []
        bnd_rows, bnd_nodes, bnd_w = [], [], []
        diag = np.zeros(int(unknown.sum()))
        I, J = np.nonzero(unknown)
        k = idx[I, J]
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = I + di, J + dj
            valid = (ni >= 0) & (nj >= 0) & (ni < m) & (nj < m)
            if di:
                fi = np.where(di > 0, I, I - 1)
                w = np.where(valid, a1[np.clip(fi, 0, m - 2), J], 0.0)
            else:
                fj = np.where(dj > 0, J, J - 1)
                w = np.where(valid, a2[I, np.clip(fj, 0, m - 2)], 0.0)
            w = np.where(valid, w, 0.0)
            diag -= w
            ni_c, nj_c = np.clip(ni, 0, m - 1), np.clip(nj, 0, m - 1)
            inner = valid & unknown[ni_c, nj_c]
            rows.append(k[inner])
            cols.append(idx[ni_c[inner], nj_c[inner]])
            vals.append(w[inner])
            outer = valid & ~unknown[ni_c, nj_c] & (w > 0)
            bnd_rows.append(k[outer])
            bnd_nodes.append(np.column_stack([ni_c[outer], nj_c[outer]]))
            bnd_w.append(w[outer])
        rows.append(np.arange(len(diag)))
        cols.append(np.arange(len(diag)))
        vals.append(diag)
        A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(len(diag), len(diag)))
        h2 = g.h * g.h
        self.lu = splu(A / h2)
        self.bnd_rows = np.concatenate(bnd_rows)
        self.bnd_nodes = np.concatenate(bnd_nodes)
        self.bnd_w = np.concatenate(bnd_w) / h2
        self.I, self.J = I, J

    def solve(self, rho, data) -> np.ndarray:
        """u with div(b^2 grad u) = rho at unknowns and u = data at boundary nodes."""
        g = self.grid
        rhs = rho[self.I, self.J].astype(float).copy()
        dvals = data[self.bnd_nodes[:, 0], self.bnd_nodes[:, 1]]
        np.subtract.at(rhs, self.bnd_rows, self.bnd_w * dvals)
        x = self.lu.solve(rhs)
        u = np.array(data, dtype=float)
        u[self.unknown] = x
        u[0, 0] = u[1, 1]
        u = np.where(g.r <= g.R + 1.5 * g.h, u, np.nan)
        if not np.all(np.isfinite(u[g.inside])):
            raise ConstructionError("subsolution solve produced non-finite values")
        return u

    def operator(self, u) -> np.ndarray:
        """Discrete div(b^2 grad u) at the unknown nodes (NaN elsewhere)."""
        g = self.grid
        a1, a2 = g.face_weights()
        out = np.full(u.shape, np.nan)
        up = np.nan_to_num(u)
        acc = np.zeros(u.shape)
        acc[:-1, :] += a1 * (up[1:, :] - up[:-1, :])
        acc[1:, :] -= a1 * (up[1:, :] - up[:-1, :])
        acc[:, :-1] += a2 * (up[:, 1:] - up[:, :-1])
        acc[:, 1:] -= a2 * (up[:, 1:] - up[:, :-1])
        out[self.unknown] = acc[self.unknown] / (g.h * g.h)
        return out


# ----------------------------------------------------------------- ensembles

def _trig(rng, K: int, scale: float):
    """Random trigonometric sum in absolute coordinates with its gradient."""
    kx = rng.integers(0, K + 1, size=K * K)
    ky = rng.integers(0, K + 1, size=K * K)
    ph = rng.uniform(0, 2 * np.pi, size=K * K)
    c = rng.normal(size=K * K) / (1.0 + kx + ky)
    w = np.pi / scale

    def value(y1, y2):
        arg = w * (kx * y1[..., None] + ky * y2[..., None]) + ph
        return np.sum(c * np.cos(arg), axis=-1)

    def grad(y1, y2):
        arg = w * (kx * y1[..., None] + ky * y2[..., None]) + ph
        sn = -c * np.sin(arg) * w
        return np.sum(sn * kx, axis=-1), np.sum(sn * ky, axis=-1)

    return value, grad


def _bump(y1, y2, c, rad):
    """(1 - t^2)^3 for t = |y - c|/rad < 1, with gradient."""
    d1, d2 = y1 - c[0], y2 - c[1]
    t2 = (d1 * d1 + d2 * d2) / rad ** 2
    inside = t2 < 1
    base = np.where(inside, 1 - t2, 0.0)
    val = base ** 3
    fac = np.where(inside, -6 * base ** 2 / rad ** 2, 0.0)
    return val, fac * d1, fac * d2


def _random_disc(rng, R: float, min_rad: float, max_center: float = 0.75):
    """Center in the quarter disc and a radius keeping the disc inside B_R."""
    for _ in range(1000):
        rc = max_center * R * np.sqrt(rng.uniform())
        th = rng.uniform(0, 0.5 * np.pi)
        room = 0.95 * R - rc
        if room >= min_rad:
            return np.array([rc * np.cos(th), rc * np.sin(th)]), rng.uniform(min_rad, room)
    raise ConstructionError("could not place a support disc")


def _sobolev_sample(grid: LabGrid, rng):
    c, rad = _random_disc(rng, 1.0, 0.25)
    tv, tg = _trig(rng, 3, rad)
    off = rng.uniform(-1.0, 1.0)
    y1, y2 = grid.y1, grid.y2
    bv, b1, b2 = _bump(y1, y2, c, rad)
    t = off + tv(y1, y2)
    g1, g2 = tg(y1, y2)
    w = bv * t
    d1 = b1 * t + bv * g1
    d2 = b2 * t + bv * g2
    return w, np.hypot(d1, d2)


def _sobolev_h1_ratio(grid, w, grad):
    b = grid.b
    num = grid.integral(b ** 4 * w ** 4)
    den = grid.integral(b ** 2 * w ** 2) * grid.integral(b ** 2 * grad ** 2)
    return num / den


def _sobolev_w11_ratio(grid, w, grad):
    b = grid.b
    return np.sqrt(grid.integral(b ** 4 * w ** 2)) / grid.integral(b ** 2 * grad)


def h1_form_ratio(grid: LabGrid, w, grad) -> float:
    """(int b^4 w^4) / ((int b^2 w^2)(int b^2 |grad w|^2)); homogeneous of degree 0 in w.

    ``grad`` is |grad w| or the component pair (d1, d2).
    """
    if isinstance(grad, tuple):
        grad = np.hypot(*grad)
    return _sobolev_h1_ratio(grid, w, grad)


def _subsolution(solver: SubsolutionSolver, rng, R: float):
    g = solver.grid
    rv, _ = _trig(rng, 3, 1.0)
    amp = np.exp(rng.uniform(np.log(1e-2), np.log(1e2)))
    rho = amp * rv(g.y1, g.y2) ** 2
    dv, _ = _trig(rng, 4, 1.0)
    data = np.exp(0.5 * dv(g.y1, g.y2))
    u = solver.solve(rho, data)
    w = u - np.nanmin(np.where(g.r <= R, u, np.nan))
    return w


def _eta(grid: LabGrid, rng):
    c, rad = _random_disc(rng, grid.R, max(0.15 * grid.R, 4 * grid.h), max_center=0.8)
    v, _, _ = _bump(grid.y1, grid.y2, c, rad)
    return v


def _caccioppoli_ratio(grid, w, eta):
    w0 = np.where(grid.r <= grid.R, w, 0.0)
    num = grid.dirichlet_form(eta * w0)
    den = grid.weighted_face_form(w0, eta)
    return num / den


def _linf_ratio(grid, w, R):
    inner = grid.r < 0.5 * R
    outer = grid.r < R
    top = np.max(np.abs(w[inner]))
    bottom = np.max(np.abs(grid.b[outer] * w[outer]))
    return top * R ** (2 / (1 + grid.profile.s)) / bottom


def weighted_quantile(values, weights, q):
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    cw /= cw[-1]
    return float(v[np.searchsorted(cw, q, side="left")])


def _iso_sample(grid: LabGrid, rng):
    tv, tg = _trig(rng, 4, 1.0)
    return tv(grid.y1, grid.y2), tg(grid.y1, grid.y2)


def _iso_lhs(grid: LabGrid, f, grad, delta):
    sel = grid.inside
    wts = grid.b[sel] ** 2
    lo = weighted_quantile(f[sel], wts, delta)
    hi = weighted_quantile(f[sel], wts, 1 - delta)
    if not hi > lo:
        return np.nan, 0.0, 0.0
    w = (f - lo) / (hi - lo)
    gnorm = np.hypot(grad[0], grad[1]) / (hi - lo)
    total = wts.sum()
    m0 = float(wts[w[sel] <= 0].sum() / total)
    m1 = float(wts[w[sel] >= 1].sum() / total)
    return grid.integral(grid.b ** 2 * gnorm), m0, m1


# ------------------------------------------------------------------ runners

def _run(lab_id, N, trials, seed, profile, R=1.0, delta=0.1):
    grid = LabGrid(N, profile, R)
    rng = np.random.default_rng(seed)
    ratios = np.empty(trials)
    extra = {}
    if lab_id in ("sobolev_h1", "sobolev_w11"):
        fn = _sobolev_h1_ratio if lab_id == "sobolev_h1" else _sobolev_w11_ratio
        for t in range(trials):
            w, gr = _sobolev_sample(grid, rng)
            ratios[t] = fn(grid, w, gr)
    elif lab_id in ("caccioppoli", "linf_rescale"):
        solver = SubsolutionSolver(grid)
        worst_sub = np.inf
        for t in range(trials):
            w = _subsolution(solver, rng, R)
            op = solver.operator(w)
            worst_sub = min(worst_sub, float(np.nanmin(op)))
            if lab_id == "caccioppoli":
                ratios[t] = _caccioppoli_ratio(grid, w, _eta(grid, rng))
            else:
                ratios[t] = _linf_ratio(grid, w, R)
        extra["min_discrete_operator"] = worst_sub
    elif lab_id == "isoperimetric":
        half = np.empty(trials)
        masses = []
        for t in range(trials):
            f, gr = _iso_sample(grid, rng)
            ratios[t], m0, m1 = _iso_lhs(grid, f, gr, delta)
            half[t], _, _ = _iso_lhs(grid, f, gr, 0.5 * delta)
            masses.append(min(m0, m1))
        extra["sigma_half_delta"] = float(np.min(half))
        extra["min_mass_fraction"] = float(np.min(masses))
        extra["per_trial_monotone"] = bool(np.all(half <= ratios * (1 + 1e-12)))
    else:
        raise DomainError(f"unknown lab id {lab_id!r}")
    return ratios, extra


def inequality_lab(lab_id: str, trials: int = 500, seed: int = 0, grid: int = 64, *, s: float = 0.5,
                   profile: AngularProfile | None = None, delta: float = 0.1,
                   radii=(0.25, 0.5), stability: bool = True) -> InequalityReport:
    """Empirical constant of one inequality over a seeded ensemble.

    The constant is the largest observed ratio, except for the
    isoperimetric lab where it is the smallest left-hand side, the
    empirical sigma(delta).  stability_factor reruns the first ten trials
    on the grid 2N and divides the constants.  linf_rescale runs at each
    radius in ``radii`` and reports the largest constant.
    """
    if lab_id not in LAB_IDS:
        raise DomainError(f"unknown lab id {lab_id!r}; choose from {LAB_IDS}")
    if trials < 100:
        raise DomainError("inequality labs need at least 100 trials")
    profile = solve_profile(s) if profile is None else profile
    s = profile.s
    pick = np.min if lab_id == "isoperimetric" else np.max
    details = {}
    if lab_id == "linf_rescale":
        consts, finite, fine = {}, True, {}
        for k, R in enumerate(radii):
            ratios, extra = _run(lab_id, grid, trials, seed + k, profile, R=R)
            finite &= bool(np.all(np.isfinite(ratios)))
            consts[repr(float(R))] = float(pick(ratios))
            details[f"min_discrete_operator_R{R}"] = extra["min_discrete_operator"]
            if stability:
                base = float(pick(ratios[:STABILITY_TRIALS]))
                ref, _ = _run(lab_id, 2 * grid, STABILITY_TRIALS, seed + k, profile, R=R)
                fine[repr(float(R))] = float(pick(ref)) / base
        vals = list(consts.values())
        details["constants"] = consts
        details["spread"] = max(vals) / min(vals)
        if stability:
            details["stability_by_radius"] = fine
        const = max(vals)
        factor = max(fine.values(), key=lambda v: abs(np.log(v))) if stability else None
        return InequalityReport(lab_id, trials, const, factor, seed, grid, s, finite, details)

    ratios, extra = _run(lab_id, grid, trials, seed, profile, delta=delta)
    details.update(extra)
    if lab_id == "isoperimetric":
        details["delta"] = delta
    finite = bool(np.all(np.isfinite(ratios)))
    const = float(pick(ratios))
    factor = None
    if stability:
        base = float(pick(ratios[:STABILITY_TRIALS]))
        ref, _ = _run(lab_id, 2 * grid, STABILITY_TRIALS, seed, profile, delta=delta)
        factor = float(pick(ref)) / base
    return InequalityReport(lab_id, trials, const, factor, seed, grid, s, finite, details)
