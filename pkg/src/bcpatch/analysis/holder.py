"""Hoelder exponents: log-log fits at the origin and pair-sampled C^{1,alpha} seminorms."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..barrier import AngularProfile, barrier_gradient, eval_barrier
from ..errors import DomainError, FitError
from ..grid import SymmetricField, gradient, interpolate
from .sandwich import RatioField

MIN_RADII = 20


@dataclass(frozen=True)
class HolderEstimate:
    exponent: float
    log_constant: float
    fit_window: tuple
    r_squared: float
    n_samples: int

    def to_json(self) -> dict:
        d = asdict(self)
        d["fit_window"] = list(self.fit_window)
        return d


def loglog_fit(x, y) -> HolderEstimate:
    """Least-squares line through (log x, log y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < MIN_RADII:
        raise FitError(f"need at least {MIN_RADII} points, got {len(x)}")
    lx, ly = np.log(x), np.log(y)
    slope, icpt = np.polyfit(lx, ly, 1)
    pred = slope * lx + icpt
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return HolderEstimate(float(slope), float(icpt), (float(x.min()), float(x.max())),
                          float(min(max(r2, 0.0), 1.0)), int(len(x)))


def radial_profile(W: RatioField, radii, n_theta: int = 64, absolute: bool = False):
    """S(r) = max over angle samples of W (of |W| when ``absolute``); NaN if too few valid samples.

    Samples whose bicubic stencil touches a masked node are discarded.
    """
    radii = np.asarray(radii, dtype=float)
    theta = (np.arange(n_theta) + 0.5) * (0.5 * np.pi / n_theta)
    rr, tt = np.meshgrid(radii, theta, indexing="ij")
    vals = interpolate(W.W, rr * np.cos(tt), rr * np.sin(tt), parity=(1, 1))
    vals = np.abs(vals) if absolute else vals
    counts = np.sum(np.isfinite(vals), axis=1)
    with np.errstate(all="ignore"):
        S = np.where(counts >= max(4, n_theta // 4), np.nanmax(np.where(np.isfinite(vals), vals, -np.inf), axis=1), np.nan)
    return S, counts


def origin_holder_fit(W: RatioField, radii, n_theta: int = 64, absolute: bool = False) -> HolderEstimate:
    """Fit log S(r) against log r for the ratio near the origin.

    S(r) is the largest W on the circle of radius r, sampled at
    ``n_theta`` angles by bicubic interpolation.  Radii where S is not
    positive are dropped.  ``absolute`` fits the largest |W| instead,
    the two-sided modulus of W at the origin.
    """
    radii = np.asarray(radii, dtype=float)
    h = W.grid.h
    if np.any(radii < 8 * h * (1 - 1e-12)):
        raise DomainError("fit radii must be at least 8h")
    S, _ = radial_profile(W, radii, n_theta, absolute)
    ok = np.isfinite(S) & (S > 0)
    if ok.sum() < MIN_RADII:
        raise FitError(f"only {int(ok.sum())} usable radii, need {MIN_RADII}")
    return loglog_fit(radii[ok], S[ok])


# ------------------------------------------------------------------ seminorms

def field_gradient_sampler(field: SymmetricField):
    """Callable (x1, x2) -> (d1, d2): bicubic interpolation of the spectral gradient."""
    d1, d2 = gradient(field)

    def sample(x1, x2):
        return interpolate(d1, x1, x2, parity=(1, -1)), interpolate(d2, x1, x2, parity=(-1, 1))

    return sample


def field_value_sampler(field: SymmetricField):
    def sample(x1, x2):
        return interpolate(field.values, x1, x2)
    return sample


def barrier_samplers(profile: AngularProfile, eps: float):
    def grad(x1, x2):
        return barrier_gradient(profile, eps, x1, x2)

    def value(x1, x2):
        return eval_barrier(profile, eps, x1, x2)

    return value, grad


def combine(*terms):
    """Linear combination of samplers: combine((1, f), (-1, g)) -> f - g."""
    def sample(x1, x2):
        acc = None
        for c, f in terms:
            v = f(x1, x2)
            if isinstance(v, tuple):
                v = tuple(c * a for a in v)
                acc = v if acc is None else tuple(a + b for a, b in zip(acc, v))
            else:
                acc = c * v if acc is None else acc + c * v
        return acc
    return sample


@dataclass(frozen=True)
class PairSet:
    x: np.ndarray
    y: np.ndarray
    dist: np.ndarray
    seed: int


def sample_pairs(h: float, pairs: int = 4000, seed: int = 0, r_max: float = 0.25,
                 d_range=None, strata: int = 16) -> PairSet:
    """Point pairs in the quarter disc r <= r_max with log-stratified separations.

    Separations are log-uniform in ``d_range`` (default [8h, 1/8]) with an
    equal count per stratum.  Half the base points are uniform in the disc,
    the other half log-uniform in radius down to h so the corner is
    sampled.  Partners that leave the disc are redrawn.
    """
    lo, hi = d_range if d_range is not None else (8 * h, 0.125)
    rng = np.random.default_rng(seed)
    per = int(np.ceil(pairs / strata))
    edges = np.linspace(np.log(lo), np.log(hi), strata + 1)
    logd = np.concatenate([rng.uniform(edges[k], edges[k + 1], per) for k in range(strata)])[:pairs]
    dist = np.exp(logd)
    m = len(dist)
    half = m // 2
    r = np.empty(m)
    r[:half] = r_max * np.sqrt(rng.uniform(0, 1, half))
    r[half:] = np.exp(rng.uniform(np.log(h), np.log(r_max), m - half))
    th = rng.uniform(0, 0.5 * np.pi, m)
    x = np.column_stack([r * np.cos(th), r * np.sin(th)])
    y = np.empty_like(x)
    todo = np.arange(m)
    for _ in range(1000):
        ang = rng.uniform(0, 2 * np.pi, len(todo))
        cand = x[todo] + dist[todo, None] * np.column_stack([np.cos(ang), np.sin(ang)])
        good = (cand[:, 0] >= 0) & (cand[:, 1] >= 0) & (np.hypot(cand[:, 0], cand[:, 1]) <= r_max)
        y[todo[good]] = cand[good]
        todo = todo[~good]
        if len(todo) == 0:
            break
    else:
        raise DomainError("could not place pair partners inside the disc")
    return PairSet(x, y, dist, seed)


def holder_quotients(grad_sampler, pairs: PairSet, alphas):
    """|grad f(x) - grad f(y)| / |x - y|^alpha for each alpha (rows) and pair (columns)."""
    gx = grad_sampler(pairs.x[:, 0], pairs.x[:, 1])
    gy = grad_sampler(pairs.y[:, 0], pairs.y[:, 1])
    diff = np.hypot(gx[0] - gy[0], gx[1] - gy[1])
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    return diff[None, :] / pairs.dist[None, :] ** alphas[:, None]


def c1alpha_seminorm(field=None, alpha=0.5, pairs: int = 4000, seed: int = 0, *,
                     grad_sampler=None, value_sampler=None, h=None, r_max: float = 0.25):
    """Pair-sampled Hoelder seminorm of the gradient and the C^1 norm.

    Either pass a :class:`SymmetricField` or explicit samplers (with ``h``).
    ``alpha`` may be a sequence; the seminorms then share one pair set and
    are checked to be nondecreasing in alpha.  Returns (seminorm, c1_norm),
    with seminorm an array when ``alpha`` is a sequence.  The C^1 norm is
    sup|f| + sup|grad f| over the sampled points together with, for a
    field, all nodes in the disc.
    """
    if field is not None:
        h = field.grid.h
        grad_sampler = grad_sampler or field_gradient_sampler(field)
        value_sampler = value_sampler or field_value_sampler(field)
    if grad_sampler is None or h is None:
        raise DomainError("need a field or a gradient sampler with h")
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    if np.any((a <= 0) | (a >= 1)):
        raise DomainError("alpha must lie in (0, 1)")
    ps = sample_pairs(h, pairs, seed, r_max)
    q = holder_quotients(grad_sampler, ps, a)
    semi = q.max(axis=1)
    order = np.argsort(a)
    if np.any(np.diff(semi[order]) < -1e-12 * np.abs(semi).max()):
        raise AssertionError("Hoelder seminorm not monotone in alpha on a fixed pair set")
    pts = np.vstack([ps.x, ps.y])
    g = grad_sampler(pts[:, 0], pts[:, 1])
    sup_grad = float(np.max(np.hypot(g[0], g[1])))
    sup_val = 0.0
    if value_sampler is not None:
        sup_val = float(np.max(np.abs(value_sampler(pts[:, 0], pts[:, 1]))))
    if field is not None:
        x1, x2 = field.grid.mesh()
        disc = np.hypot(x1, x2) <= r_max
        d1, d2 = gradient(field)
        sup_val = max(sup_val, float(np.max(np.abs(field.values[disc]))))
        sup_grad = max(sup_grad, float(np.max(np.hypot(d1, d2)[disc])))
    c1 = sup_val + sup_grad
    if np.ndim(alpha) == 0:
        return float(semi[0]), c1
    return semi, c1
