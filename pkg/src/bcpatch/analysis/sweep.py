"""Convergence of phi_eps to psi_0 and continuity in eps along a decade sweep."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..barrier import AngularProfile, solve_profile
from ..errors import DomainError, FitError
from ..grid import SymmetricField, gradient
from ..poisson import compute_psi0
from ..steady import SolveConfig, grid_resolves, sandwich_radius, solve_steady
from .holder import (barrier_samplers, c1alpha_seminorm, combine, field_gradient_sampler,
                     field_value_sampler, origin_holder_fit)
from .sandwich import SCHEMA_VERSION, ratio_field

CSV_COLUMNS = ("eps", "c1_norm_diff", "c1alpha_seminorm_diff", "c1alphaplus_seminorm_residual",
               "barrier_c1alpha", "continuity_diff")


def alpha_s(s: float) -> float:
    return (1 - s) / (1 + s)


def estimate_sigma(phi: SymmetricField, profile: AngularProfile, eps: float, n_radii: int = 24) -> dict:
    """Hoelder exponent of W at the origin over radii in [8h, R].

    Falls back to |W| when W has no positive values in the window.  R is
    the sandwich radius, widened to 20 * 8h when the grid cannot resolve it.
    """
    h = phi.grid.h
    r_hi = max(sandwich_radius(eps), 20 * 8 * h)
    radii = np.geomspace(8 * h, r_hi, n_radii)
    W = ratio_field(phi, profile, eps)
    try:
        est, kind = origin_holder_fit(W, radii), "signed"
    except FitError:
        est, kind = origin_holder_fit(W, radii, absolute=True), "absolute"
    return {"sigma_est": est.exponent, "r_squared": est.r_squared, "fit": kind,
            "window": list(est.fit_window)}


def _c1alpha_norm(value, grad, h, alpha, pairs, seed):
    semi, c1 = c1alpha_seminorm(alpha=alpha, pairs=pairs, seed=seed, grad_sampler=grad,
                                value_sampler=value, h=h)
    return semi, c1


def _full_c1(f: SymmetricField) -> float:
    d1, d2 = gradient(f)
    return float(np.max(np.abs(f.values)) + np.max(np.hypot(d1, d2)))


@dataclass
class SweepRow:
    eps: float
    c1_norm_diff: float
    c1alpha_seminorm_diff: float
    c1alphaplus_seminorm_residual: float
    barrier_c1alpha: float
    continuity_diff: float | None
    sigma_est: float
    sigma_used: float
    sigma_fit: str
    resolved: bool
    iterations: int


@dataclass
class SweepTable:
    s: float
    n: int
    pairs: int
    seed: int
    alpha: float
    rows: list = field(default_factory=list)
    barrier_slope: float | None = None

    def column(self, name):
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.rows])

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "s": self.s, "n": self.n, "pairs": self.pairs, "seed": self.seed, "alpha_s": self.alpha,
            "barrier_loglog_slope": self.barrier_slope,
            "expected_barrier_slope": self.s / (1 + self.s),
            "rows": [asdict(r) for r in self.rows],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(["%.17g" % r.eps, "%.17g" % r.c1_norm_diff, "%.17g" % r.c1alpha_seminorm_diff,
                        "%.17g" % r.c1alphaplus_seminorm_residual, "%.17g" % r.barrier_c1alpha,
                        "" if r.continuity_diff is None else "%.17g" % r.continuity_diff])
        return buf.getvalue()


def convergence_sweep(s: float, eps_list, config: SolveConfig | None = None, *, n: int | None = None,
                      pairs: int = 4000, seed: int = 0, fields=None, profile=None,
                      require_resolved: bool = False) -> SweepTable:
    """Norm table along a decreasing eps list.

    For every eps the solver runs from ``config`` (eps replaced), unless
    ``fields`` maps eps to an already converged field.  Columns:

    - c1_norm_diff: C^1 norm of phi_eps - psi_0 on the quarter
    - c1alpha_seminorm_diff: C^{1,alpha_s} seminorm of phi_eps - psi_0
    - c1alphaplus_seminorm_residual: C^{1,alpha_s + sigma/2} seminorm of
      phi_eps - barrier - psi_0, sigma = min(sigma_est, s/100)
    - barrier_c1alpha: C^{1,alpha_s} norm of the barrier
    - continuity_diff: C^{1,alpha_s} norm of phi_eps - phi_eps' for the
      previous eps' (None in the first row)

    Seminorms sample pairs in the disc r <= 1/4 with one pair set per
    call (same seed), so the rows are directly comparable.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise DomainError("empty eps list")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise DomainError("eps list must be strictly decreasing")
    if config is None:
        if n is None:
            raise DomainError("need a solver config or a grid size")
        config = SolveConfig(eps=eps_list[0], s=s, n=n)
    if abs(config.s - s) > 0:
        raise DomainError("config and sweep use different s")
    n = config.n
    if require_resolved:
        bad = [e for e in eps_list if not grid_resolves(e, n)]
        if bad:
            from ..errors import ResolutionError
            raise ResolutionError(f"grid n={n} does not resolve eps in {bad}", eps=bad, n=n)
    profile = solve_profile(s) if profile is None else profile
    a = alpha_s(s)
    h = 1.0 / (2 * n)
    psi0 = compute_psi0(n)
    table = SweepTable(s=s, n=n, pairs=pairs, seed=seed, alpha=a)
    prev = None
    for eps in eps_list:
        if fields is not None and eps in fields:
            phi, iters = fields[eps], 0
        else:
            rep = solve_steady(replace(config, eps=eps), profile=profile, certify=False)
            phi, iters = rep.field, rep.iterations
        diff = phi - psi0
        sig = estimate_sigma(phi, profile, eps)
        sigma = min(sig["sigma_est"], s / 100)
        if sigma <= 0:
            sigma = s / 100
        semi_diff, _ = c1alpha_seminorm(diff, a, pairs, seed)
        b_val, b_grad = barrier_samplers(profile, eps)
        d_grad = combine((1.0, field_gradient_sampler(diff)), (-1.0, b_grad))
        d_val = combine((1.0, field_value_sampler(diff)), (-1.0, b_val))
        semi_res, _ = _c1alpha_norm(d_val, d_grad, h, a + sigma / 2, pairs, seed)
        b_semi, b_c1 = _c1alpha_norm(b_val, b_grad, h, a, pairs, seed)
        cont = None
        if prev is not None:
            dd = phi - prev
            c_semi, _ = c1alpha_seminorm(dd, a, pairs, seed)
            cont = _full_c1(dd) + c_semi
        table.rows.append(SweepRow(
            eps=eps, c1_norm_diff=_full_c1(diff), c1alpha_seminorm_diff=float(semi_diff),
            c1alphaplus_seminorm_residual=float(semi_res), barrier_c1alpha=float(b_semi + b_c1),
            continuity_diff=cont, sigma_est=float(sig["sigma_est"]), sigma_used=float(sigma),
            sigma_fit=sig["fit"], resolved=bool(grid_resolves(eps, n)), iterations=int(iters),
        ))
        prev = phi
    if len(table.rows) > 1:
        e = np.log(table.column("eps"))
        b = np.log(table.column("barrier_c1alpha"))
        table.barrier_slope = float(np.polyfit(e, b, 1)[0])
    return table
