"""Steady states Delta phi = G_eps(phi) in the odd-odd, diagonal-symmetric class.

The solver iterates phi <- (1 - omega) phi + omega * T(phi), with T built on
L, the fourth-order finite-difference Laplacian.  On odd-odd data that
operator is diagonal in the sine basis, so every step costs a few fast
sine transforms, and the converged field satisfies the discrete equation
that :func:`residual` checks in real space.

Near the corner phi behaves like the barrier, r^(2/(1+s)) g(theta), which no
grid resolves within a few cells of the origin.  By default the solver
splits phi = chi B + v with B the barrier and chi a radial cutoff, applies
the exact Laplacian to chi B and the discrete one to v only:
T(phi) = chi B + L^{-1}(G_eps(phi) - Delta(chi B)).
"""
from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from ._transforms import dst_analysis, dst_synthesis
from .errors import ConvergenceError, DomainError, StabilizationError
from .grid import QuarterGrid, SymmetricField, load_symmetric, trapezoid_weights
from .poisson import compute_psi0, laplacian_eigenvalues

INIT_KINDS = ("psi0", "barrier-blend", "file", "psi0-discrete")
CORNER_KINDS = ("barrier", "none")
SMALL_EPS = 0.05
CUTOFF = (1 / 16, 1 / 8)


@dataclass(frozen=True)
class Nonlinearity:
    eps: float
    s: float

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")
        if not 0 < self.s < 1:
            raise DomainError(f"s must lie in (0, 1), got {self.s}")

    def __call__(self, v):
        return g_eps(self, v)


def g_eps(nl: Nonlinearity, v):
    """Odd extension of -1 (v >= eps), -(eps/v)^s (0 < v < eps); zero at v = 0."""
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    safe = np.where(a == 0, 1.0, a)
    with np.errstate(over="ignore"):  # subnormal v gives -inf, the limit at 0+
        base = np.where(a >= nl.eps, -1.0, -((nl.eps / safe) ** nl.s))
    out = np.where(a == 0, 0.0, np.sign(v) * base)
    return float(out) if out.ndim == 0 else out


def grid_resolves(eps: float, n: int, cells: float = 20.0) -> bool:
    """True when the sandwich radius sqrt(eps)/(-ln eps) spans at least ``cells`` grid spacings."""
    if not 0 < eps < 1:
        return False
    return np.sqrt(eps) / -np.log(eps) >= cells / (2 * n)


def sandwich_radius(eps: float) -> float:
    return float(np.sqrt(eps) / -np.log(eps))


@dataclass(frozen=True)
class SolveConfig:
    eps: float
    s: float
    n: int
    omega: float = 0.5
    tol: float = 1e-8
    max_iter: int = 5000
    init: str = "psi0"
    init_file: str | None = None
    symbol: str = "fd4"
    clamp_limit: int = 50
    corner: str = "barrier"

    def __post_init__(self):
        Nonlinearity(self.eps, self.s)
        QuarterGrid(self.n)
        if not 0 < self.omega <= 1:
            raise DomainError(f"omega must lie in (0, 1], got {self.omega}")
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")
        if self.init not in INIT_KINDS:
            raise DomainError(f"unknown init {self.init!r}")
        if self.corner not in CORNER_KINDS:
            raise DomainError(f"unknown corner treatment {self.corner!r}")
        if self.init == "file" and not self.init_file:
            raise DomainError("init 'file' needs init_file")

    @property
    def nonlinearity(self) -> Nonlinearity:
        return Nonlinearity(self.eps, self.s)


@dataclass
class SolveReport:
    field: SymmetricField
    residual_history: np.ndarray
    iterations: int
    final_residual: float
    config: SolveConfig
    wall_time: float
    certified: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "config": asdict(self.config),
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "residual_history": [float(r) for r in self.residual_history],
            "certified": self.certified,
            "warnings": list(self.warnings),
            "wall_time": self.wall_time,
        }


def _pad_odd(v):
    """Two ghost layers per side from the odd reflections through x = 0 and x = 1/2."""
    n = v.shape[0] - 1
    p = np.zeros((n + 5, n + 5))
    p[2:-2, 2:-2] = v
    p[1, 2:-2] = -v[1]
    p[0, 2:-2] = -v[2]
    p[-2, 2:-2] = -v[n - 1]
    p[-1, 2:-2] = -v[n - 2]
    p[:, 1] = -p[:, 3]
    p[:, 0] = -p[:, 4]
    p[:, -2] = -p[:, -4]
    p[:, -1] = -p[:, -5]
    return p


def fd4_laplacian(f) -> np.ndarray:
    """Real-space fourth-order Laplacian at all quarter nodes of an odd-odd field."""
    v = f.values if isinstance(f, SymmetricField) else np.asarray(f, dtype=float)
    h = 1.0 / (2 * (v.shape[0] - 1))
    p = _pad_odd(v)
    c = slice(2, -2)
    d11 = -p[:-4, c] + 16 * p[1:-3, c] - 30 * p[2:-2, c] + 16 * p[3:-1, c] - p[4:, c]
    d22 = -p[c, :-4] + 16 * p[c, 1:-3] - 30 * p[c, 2:-2] + 16 * p[c, 3:-1] - p[c, 4:]
    return (d11 + d22) / (12 * h * h)


def fd4_gradient(f):
    """Fourth-order centered gradient at all quarter nodes of an odd-odd field."""
    v = f.values if isinstance(f, SymmetricField) else np.asarray(f, dtype=float)
    h = 1.0 / (2 * (v.shape[0] - 1))
    p = _pad_odd(v)
    c = slice(2, -2)
    d1 = (p[:-4, c] - 8 * p[1:-3, c] + 8 * p[3:-1, c] - p[4:, c]) / (12 * h)
    d2 = (p[c, :-4] - 8 * p[c, 1:-3] + 8 * p[c, 3:-1] - p[c, 4:]) / (12 * h)
    return d1, d2


def cutoff(r, r1: float = CUTOFF[0], r2: float = CUTOFF[1]):
    """C^3 radial step, 1 for r <= r1 and 0 for r >= r2, with its first two r-derivatives."""
    L = r2 - r1
    t = np.clip((np.asarray(r, dtype=float) - r1) / L, 0.0, 1.0)
    S = t ** 4 * (35 - 84 * t + 70 * t ** 2 - 20 * t ** 3)
    S1 = 140 * t ** 3 * (1 - t) ** 3 / L
    S2 = 420 * t ** 2 * (1 - t) ** 2 * (1 - 2 * t) / L ** 2
    return 1.0 - S, -S1, -S2


@dataclass(frozen=True, eq=False)
class CornerSplit:
    """chi B and its exact Laplacian at the interior nodes."""
    part: np.ndarray
    laplacian: np.ndarray


def corner_split(profile, eps: float, n: int) -> CornerSplit:
    """Cut-off barrier chi(r) B and Delta(chi B) = -chi eps^s B^-s + B (chi'' + (2 beta + 1) chi'/r).

    B solves Delta B = -eps^s B^-s off the axes and its odd extension is
    C^1 across them, so the pointwise Laplacian is the distributional one.
    """
    from .barrier import barrier_values

    grid = QuarterGrid(n)
    x1, x2 = grid.mesh()
    r = np.hypot(x1, x2)
    B = barrier_values(profile, eps, grid)
    chi, d1, d2 = cutoff(r)
    s, beta = profile.s, profile.beta
    off = (x1 > 0) & (x2 > 0) & (B > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = -chi * eps ** s * B ** (-s) + B * (d2 + (2 * beta + 1) * d1 / r)
    lap = np.where(off, lap, 0.0)
    part, lap = (chi * B)[1:-1, 1:-1], lap[1:-1, 1:-1]
    part = 0.5 * (part + part.T)
    lap = 0.5 * (lap + lap.T)
    part.setflags(write=False)
    lap.setflags(write=False)
    return CornerSplit(part, lap)


def fixed_point_map(phi: SymmetricField, nl: Nonlinearity, kind: str = "fd4",
                    split: CornerSplit | None = None) -> SymmetricField:
    """T(phi) = L^{-1} G_eps(phi) on the interior nodes, or the corner-split form."""
    if np.any(phi.interior < 0):
        raise DomainError("fixed-point map needs phi >= 0 on the quarter")
    lam = laplacian_eigenvalues(phi.grid.n, kind)
    rhs = g_eps(nl, phi.interior)
    if split is None:
        out = dst_synthesis(dst_analysis(rhs) / lam)
    else:
        out = split.part + dst_synthesis(dst_analysis(rhs - split.laplacian) / lam)
    if np.array_equal(phi.interior, phi.interior.T):
        out = 0.5 * (out + out.T)
    return SymmetricField.from_interior(phi.grid, out)


def discrete_psi0(n: int, kind: str = "fd4") -> SymmetricField:
    """Solution of L psi = -1 in the quarter for the given discrete Laplacian."""
    lam = laplacian_eigenvalues(n, kind)
    out = dst_synthesis(dst_analysis(-np.ones((n - 1, n - 1))) / lam)
    return SymmetricField.from_interior(QuarterGrid(n), 0.5 * (out + out.T))


def blend_start(n: int, eps: float, s: float, profile=None) -> SymmetricField:
    """psi_0 plus the barrier tapered to zero between r = 1/8 and r = 1/4."""
    from .barrier import barrier_values, solve_profile

    grid = QuarterGrid(n)
    if profile is None:
        profile = solve_profile(s)
    r, _ = grid.polar()
    taper = np.clip((0.25 - r) / 0.125, 0.0, 1.0)
    taper = np.sin(0.5 * np.pi * taper) ** 2
    bump = barrier_values(profile, eps, grid) * taper
    out = compute_psi0(n).interior + bump[1:-1, 1:-1]
    return SymmetricField.from_interior(grid, 0.5 * (out + out.T))


def _initial(config: SolveConfig, profile=None) -> SymmetricField:
    if config.init == "psi0":
        return compute_psi0(config.n)
    if config.init == "psi0-discrete":
        return discrete_psi0(config.n, config.symbol)
    if config.init == "barrier-blend":
        return blend_start(config.n, config.eps, config.s, profile)
    f = load_symmetric(config.init_file)
    if f.grid.n != config.n:
        raise DomainError(f"init file has n={f.grid.n}, config asks for n={config.n}")
    if np.any(f.interior < 0):
        raise DomainError("init file is negative at an interior node")
    return f


def solve_steady(config: SolveConfig, *, callback=None, profile=None, certify=True) -> SolveReport:
    """Damped Picard iteration from the configured start.

    ``callback(k, interior)`` sees every iterate before its update.  With
    ``certify`` the report carries phi >= psi_0, the real-space residual
    and, when the grid resolves it, the sandwich check.
    """
    t0 = time.perf_counter()
    nl = config.nonlinearity
    n, omega = config.n, config.omega
    lam = laplacian_eigenvalues(n, config.symbol)
    psi0 = compute_psi0(n).interior
    if config.corner == "barrier" or config.init == "barrier-blend":
        if profile is None:
            from .barrier import solve_profile

            profile = solve_profile(config.s)
        elif abs(profile.s - config.s) > 1e-15:
            raise DomainError(f"profile has s={profile.s}, config asks for s={config.s}")
    split = corner_split(profile, config.eps, n) if config.corner == "barrier" else None
    part = 0.0 if split is None else split.part
    lap_part = 0.0 if split is None else split.laplacian
    phi = np.array(_initial(config, profile).interior)
    notes = []
    if config.eps >= SMALL_EPS:
        notes.append(f"eps={config.eps} is outside the small-eps regime (< {SMALL_EPS})")
    if not grid_resolves(config.eps, n):
        notes.append(
            f"grid n={n} does not resolve the sandwich radius for eps={config.eps} "
            "(needs sqrt(eps)/(-ln eps) >= 20h)"
        )

    history = []
    clamped_late = 0
    for k in range(config.max_iter + 1):
        bad = phi <= 0
        if np.any(bad):
            phi = np.where(bad, psi0, phi)
            if k > 10:
                clamped_late += 1
                if clamped_late > config.clamp_limit:
                    raise StabilizationError(
                        "iterates keep leaving the positive cone",
                        residual_history=history,
                    )
        if not np.all(np.isfinite(phi)):
            raise StabilizationError("non-finite iterate", residual_history=history)
        if callback is not None:
            callback(k, phi)
        G = g_eps(nl, phi)
        rhs = G - lap_part
        Lv = dst_synthesis(lam * dst_analysis(phi - part))
        res = float(np.max(np.abs(Lv - rhs)) / np.max(np.abs(G)))
        history.append(res)
        if res <= config.tol:
            break
        if k == config.max_iter:
            raise ConvergenceError(
                f"no convergence in {config.max_iter} iterations (residual {res:.3e})",
                residual_history=history,
            )
        T = part + dst_synthesis(dst_analysis(rhs) / lam)
        T = 0.5 * (T + T.T)
        phi = T if omega == 1.0 else (1.0 - omega) * phi + omega * T

    drift = float(np.max(np.abs(phi - phi.T)))
    if drift > 1e-12:
        phi = 0.5 * (phi + phi.T)
    hist = np.array(history)
    if omega <= 0.5 and len(hist) > 11 and np.any(np.diff(hist[10:]) > 0):
        msg = "residual was not monotone after iteration 10"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    out = SymmetricField.from_interior(QuarterGrid(n), phi)
    report = SolveReport(
        field=out, residual_history=hist, iterations=len(history) - 1,
        final_residual=float(hist[-1]), config=config, wall_time=0.0, warnings=notes,
    )
    if certify:
        report.certified = certify_solution(out, nl, profile=profile, split=split)
    report.wall_time = time.perf_counter() - t0
    return report


def certify_solution(phi: SymmetricField, nl: Nonlinearity, profile=None, tol_ineq: float = 1e-10,
                     split: CornerSplit | None = None) -> dict:
    """Inequalities a converged phi_eps must satisfy, with their margins.

    ``split`` is the corner treatment the field was solved with; the
    residual is measured for the same discrete operator.
    """
    psi0 = compute_psi0(phi.grid.n)
    margin = float(np.min(phi.values - psi0.values))
    out = {
        "phi_minus_psi0_min": margin,
        "phi_ge_psi0": bool(margin >= -tol_ineq),
        "fd_residual": residual(phi, nl, split=split),
        "diagonal_asymmetry": float(np.max(np.abs(phi.values - phi.values.T))),
    }
    if grid_resolves(nl.eps, phi.grid.n):
        from .analysis.sandwich import sandwich_check
        from .barrier import solve_profile

        if profile is None:
            profile = solve_profile(nl.s)
        out["sandwich"] = sandwich_check(phi, profile, nl.eps).to_json()
    else:
        out["sandwich"] = None
    return out


def residual(phi: SymmetricField, nl, r_min: float | None = None,
             split: CornerSplit | None = None) -> float:
    """Normalized sup of |L4 phi - G_eps(phi)| at interior nodes with r >= r_min.

    L4 is the fourth-order stencil applied in real space on the odd
    extension.  ``nl`` may also be a frozen right-hand side (array or field).
    With a corner split, L4 acts on phi - chi B and the exact Laplacian of
    chi B is added.
    """
    grid = phi.grid
    r_min = 8 * grid.h if r_min is None else r_min
    if split is None:
        lap = fd4_laplacian(phi)[1:-1, 1:-1]
    else:
        v = np.zeros(grid.shape)
        v[1:-1, 1:-1] = phi.interior - split.part
        lap = fd4_laplacian(v)[1:-1, 1:-1] + split.laplacian
    if isinstance(nl, Nonlinearity):
        rhs = g_eps(nl, phi.interior)
    else:
        rhs = nl.values if isinstance(nl, SymmetricField) else np.asarray(nl, dtype=float)
        if rhs.shape == grid.shape:
            rhs = rhs[1:-1, 1:-1]
    r, _ = grid.polar()
    keep = r[1:-1, 1:-1] >= r_min
    scale = np.max(np.abs(rhs[keep]))
    if scale == 0:
        return float(np.max(np.abs(lap[keep])))
    return float(np.max(np.abs(lap[keep] - rhs[keep])) / scale)


def steadiness_check(phi: SymmetricField, r_cut: float | None = None, band: int = 4) -> float:
    """||u . grad(omega)|| / (||u|| ||grad(omega)||) in L2, u = (-d2 phi, d1 phi), omega = Delta phi.

    All derivatives are local fourth-order differences; omega uses the
    solver's own stencil.  The vorticity of a steady state has a kink on
    the patch boundary and blows up at the axes inside the patch, so a
    global spectral derivative would ring across the whole quarter.  Nodes
    with r < r_cut or within ``band`` cells of the edges are left out,
    which keeps every stencil on one side of the axes.
    """
    grid = phi.grid
    r_cut = 16 * grid.h if r_cut is None else r_cut
    vort = fd4_laplacian(phi)
    vort[0] = vort[-1] = 0.0
    vort[:, 0] = vort[:, -1] = 0.0
    d1, d2 = fd4_gradient(phi)
    w1, w2 = fd4_gradient(vort)
    u1, u2 = -d2, d1
    x1, x2 = grid.mesh()
    r = np.hypot(x1, x2)
    edge = np.minimum(np.minimum(x1, x2), 0.5 - np.maximum(x1, x2))
    w = trapezoid_weights(grid.n)
    weight = np.outer(w, w) * ((r >= r_cut) & (edge >= band * grid.h))
    adv = np.sqrt(np.sum(weight * (u1 * w1 + u2 * w2) ** 2))
    nu = np.sqrt(np.sum(weight * (u1 ** 2 + u2 ** 2)))
    nw = np.sqrt(np.sum(weight * (w1 ** 2 + w2 ** 2)))
    if nu == 0 or nw == 0:
        return 0.0
    return float(adv / (nu * nw))
