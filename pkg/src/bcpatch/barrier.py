"""Self-similar barrier r**beta * g(theta) for Delta psi = -eps**s / psi**s on the quadrant.

With beta = 2/(1+s) the angular profile solves

    g'' + beta**2 g + g**(-s) = 0,   g(0) = g(pi/2) = 0,   g > 0,

and is symmetric about pi/4.  Near theta = 0 the solution behaves like
a*theta + b*theta**(2-s) + ..., so g is stored through q = g/theta as a
smooth function of t = theta**(1-s).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly

from .errors import ConvergenceError, DomainError
from .grid import QuarterGrid, SymmetricField

QUARTER = np.pi / 4


def expansion_coefficients(a: float, s: float):
    """Coefficients (b, c) of g = a*theta + b*theta**(2-s) + c*theta**(3-2s) + ..."""
    b = -a ** (-s) / ((2 - s) * (1 - s))
    c = -s * a ** (-2 * s - 1) / ((2 - s) * (1 - s) * (3 - 2 * s) * (2 - 2 * s))
    return b, c


@dataclass(frozen=True, eq=False)
class AngularProfile:
    """Barrier profile sampled at K+1 nodes on [0, pi/2].

    ``P`` holds g - theta*g', the variable the ODE is integrated in; it is
    kept so the Hermite interpolant can be rebuilt without cancellation.
    """
    s: float
    beta: float
    a: float
    theta: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    dg: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)
    bracket: tuple = (np.nan, np.nan)
    _spline: BPoly = field(init=False, repr=False, default=None)

    def __post_init__(self):
        for name in ("theta", "g", "dg", "P"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_spline", self._build_spline())

    @property
    def K(self) -> int:
        return len(self.theta) - 1

    @property
    def midpoint_value(self) -> float:
        return float(self.g[self.K // 2])

    def _half(self):
        half = self.K // 2
        return self.theta[: half + 1], self.g[: half + 1], self.P[: half + 1]

    def _build_spline(self):
        s, beta = self.s, self.beta
        th, g, P = self._half()
        t = th ** (1 - s)
        q = np.empty_like(th)
        qt = np.empty_like(th)
        qtt = np.empty_like(th)
        b, c = expansion_coefficients(self.a, s)
        q[0], qt[0], qtt[0] = self.a, b, 2 * c
        tk, gk, pk = th[1:], g[1:], P[1:]
        q[1:] = gk / tk
        qt[1:] = -pk * tk ** (s - 2) / (1 - s)
        force = beta ** 2 * gk + gk ** (-s)
        qtt[1:] = (-tk ** (2 * s - 1) * force + (2 - s) * pk * tk ** (2 * s - 3)) / (1 - s) ** 2
        return BPoly.from_derivatives(t, np.column_stack([q, qt, qtt]))

    def _fold(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(theta < 0) or np.any(theta > np.pi / 2 + 1e-15):
            raise DomainError("angle outside [0, pi/2]")
        upper = theta > QUARTER
        return np.where(upper, np.pi / 2 - theta, theta).clip(0.0, QUARTER), upper

    def __call__(self, theta):
        """g(theta)."""
        th, _ = self._fold(theta)
        return th * self._spline(th ** (1 - self.s))

    def derivative(self, theta):
        """g'(theta)."""
        th, upper = self._fold(theta)
        t = th ** (1 - self.s)
        d = self._spline(t) + (1 - self.s) * t * self._spline(t, 1)
        return np.where(upper, -d, d)

    def second_derivative(self, theta):
        th, _ = self._fold(theta)
        s = self.s
        t = th ** (1 - s)
        with np.errstate(divide="ignore"):
            return (1 - s) * th ** (-s) * ((2 - s) * self._spline(t, 1) + (1 - s) * t * self._spline(t, 2))

    def to_json(self) -> dict:
        return {
            "s": self.s, "beta": self.beta, "a": self.a,
            "theta": self.theta.tolist(), "g": self.g.tolist(),
            "dg": self.dg.tolist(), "P": self.P.tolist(),
            "bracket": list(self.bracket),
        }

    @classmethod
    def from_json(cls, data: dict) -> "AngularProfile":
        return cls(
            s=float(data["s"]), beta=float(data["beta"]), a=float(data["a"]),
            theta=data["theta"], g=data["g"], dg=data["dg"], P=data["P"],
            bracket=tuple(data.get("bracket", (np.nan, np.nan))),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path) -> "AngularProfile":
        return cls.from_json(json.loads(Path(path).read_text()))


def _rhs(s, beta):
    def rhs(tau, y):
        g, p = y
        return [g - p, np.exp(2 * tau) * (beta * beta * g + max(g, 1e-300) ** (-s))]
    return rhs


def _hit_zero(tau, y):
    # fires just before g reaches zero on a collapsing branch; admissible
    # branches keep g ~ a*theta far above this line
    return y[0] - 1e-8 * np.exp(tau)


_hit_zero.terminal = True
_hit_zero.direction = -1


def _start_state(a, s, beta, theta):
    b, c = expansion_coefficients(a, s)
    g = a * theta + b * theta ** (2 - s) + c * theta ** (3 - 2 * s) - beta ** 2 * a * theta ** 3 / 6
    p = -(1 - s) * b * theta ** (2 - s) - (2 - 2 * s) * c * theta ** (3 - 2 * s) + beta ** 2 * a * theta ** 3 / 3
    return g, p


def _shoot(a, s, beta, tau_start, rtol, dense=False):
    """Integrate from the singular endpoint to pi/4 in tau = ln(theta).

    Starts from the three-term expansion with slope ``a`` and returns
    (g'(pi/4) indicator, solution); the indicator is g - P = theta*g' at
    pi/4, or -1 if the branch collapses to zero first.
    """
    y0 = _start_state(a, s, beta, np.exp(tau_start))
    sol = solve_ivp(
        _rhs(s, beta), (tau_start, np.log(QUARTER)), list(y0), method="DOP853",
        rtol=rtol, atol=1e-300, events=_hit_zero, dense_output=dense,
    )
    if sol.status == 1:
        return -1.0, sol
    if sol.status != 0:
        raise ConvergenceError(f"profile integration failed: {sol.message}")
    g, p = sol.y[:, -1]
    return g - p, sol


def solve_profile(s: float, K: int = 4096, tol: float = 1e-13) -> AngularProfile:
    """Shoot on the endpoint slope a = g'(0), bisecting until g'(pi/4) = 0.

    The integration runs in tau = ln(theta) on (g, P = g - theta g') and
    starts from the endpoint expansion at t = theta**(1-s) = 1e-5, where
    the neglected terms are O(t^3) relative.  Shooting away from the
    singular endpoint is stable: a perturbation of P stays bounded while g
    grows.  ``tol`` is the relative tolerance of the integrator; bisection
    runs to machine resolution.  Nodes are uniform in t on [0, pi/4] and
    mirrored about pi/4, K even.
    """
    if not 0.05 < s < 0.95:
        raise DomainError(f"s must lie in (0.05, 0.95), got {s}")
    if K < 512 or K % 2:
        raise DomainError(f"K must be even and >= 512, got {K}")
    beta = 2.0 / (1.0 + s)
    tau_start = np.log(1e-5) / (1 - s)

    def miss(a):
        return _shoot(a, s, beta, tau_start, tol)[0]

    lo, hi = 1.0, 2.0
    for _ in range(60):
        if miss(lo) < 0:
            break
        lo, hi = 0.5 * lo, lo
    else:
        raise ConvergenceError("no lower bracket for the profile slope", bracket=(lo, hi))
    for _ in range(60):
        if miss(hi) > 0:
            break
        lo, hi = hi, 2 * hi
    else:
        raise ConvergenceError("no upper bracket for the profile slope", bracket=(lo, hi))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if miss(mid) < 0:
            lo = mid
        else:
            hi = mid
    a = 0.5 * (lo + hi)
    _, sol = _shoot(a, s, beta, tau_start, tol, dense=True)
    if sol.status != 0:
        raise ConvergenceError("profile bisection ended on a collapsing branch", bracket=(lo, hi))

    half = K // 2
    tk = np.linspace(0.0, QUARTER ** (1 - s), half + 1)
    th = tk ** (1.0 / (1 - s))
    th[-1] = QUARTER
    g = np.zeros(half + 1)
    P = np.zeros(half + 1)
    th_start = np.exp(tau_start)
    inside = th >= th_start
    inside[0] = False
    g[inside], P[inside] = sol.sol(np.log(th[inside]))
    g[-1], P[-1] = sol.y[:, -1]
    early = ~inside
    early[0] = False
    if np.any(early):
        g[early], P[early] = _start_state(a, s, beta, th[early])
    # g'(pi/4) is zero up to the bisection resolution; pin the symmetric value
    c = 0.5 * (g[-1] + P[-1])
    g[-1] = P[-1] = c
    dg = np.empty(half + 1)
    dg[0] = a
    dg[1:] = (g[1:] - P[1:]) / th[1:]

    theta = np.concatenate([th, np.pi / 2 - th[-2::-1]])
    theta[-1] = np.pi / 2
    return AngularProfile(
        s=float(s), beta=beta, a=float(a),
        theta=theta,
        g=np.concatenate([g, g[-2::-1]]),
        dg=np.concatenate([dg, -dg[-2::-1]]),
        P=np.concatenate([P, P[-2::-1]]),
        bracket=(float(lo), float(hi)),
    )


def _p_spline(profile: AngularProfile):
    """Quintic Hermite spline of P(t) on [0, pi/4] from node values and the ODE.

    dP/dtheta = theta*F with F = beta^2 g + g^(-s), so P carries g'' through
    a first derivative only.
    """
    s, beta = profile.s, profile.beta
    th, g, P = profile._half()
    th, g, P = th[1:], g[1:], P[1:]
    dg = profile.dg[1: profile.K // 2 + 1]
    F = beta ** 2 * g + g ** (-s)
    dF = (beta ** 2 - s * g ** (-s - 1)) * dg
    pt = th ** (1 + s) * F / (1 - s)
    ptt = ((1 + s) * th ** s * F + th ** (1 + s) * dF) * th ** s / (1 - s) ** 2
    return BPoly.from_derivatives(th ** (1 - s), np.column_stack([P, pt, ptt]))


def profile_residual(profile: AngularProfile, cut: float = 1e-3) -> float:
    """Sup of |g'' + beta^2 g + g^(-s)| on [cut, pi/2 - cut].

    g'' is taken as -(dP/dtheta)/theta from a separate Hermite spline of P
    and g from the profile itself, at the nodes and at the midpoints between
    them (in t).  Between nodes neither spline is pinned by the ODE, so this
    measures the consistency of the stored solution; a direct second
    derivative of the g interpolant would be dominated by roundoff.
    """
    s = profile.s
    th = profile.theta[: profile.K // 2 + 1]
    t = th ** (1 - s)
    tm = 0.5 * (t[1:] + t[:-1])
    pts = np.concatenate([th, tm ** (1.0 / (1 - s))])
    pts = np.sort(pts[(pts >= cut) & (pts <= QUARTER)])
    spline = _p_spline(profile)
    dp = spline(pts ** (1 - s), 1) * (1 - s) * pts ** (-s)
    g = profile(pts)
    res = -dp / pts + profile.beta ** 2 * g + g ** (-s)
    return float(np.max(np.abs(res)))


def eval_barrier(profile: AngularProfile, eps: float, x1, x2=None):
    """eps**(s/(1+s)) * r**beta * g(theta) at points of the closed quarter.

    Accepts either a point pair ``x1`` or coordinate arrays ``x1, x2``.
    """
    if x2 is None:
        x1, x2 = x1
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if np.any(x1 < 0) or np.any(x2 < 0):
        raise DomainError("barrier is defined on the closed first quadrant")
    r = np.hypot(x1, x2)
    theta = np.arctan2(x2, x1)
    s = profile.s
    out = eps ** (s / (1 + s)) * r ** profile.beta * profile(theta)
    out = np.where((x1 == 0) | (x2 == 0), 0.0, out)
    return float(out) if out.ndim == 0 else out


def barrier_gradient(profile: AngularProfile, eps: float, x1, x2):
    """Analytic gradient of the barrier: beta r^(beta-1) g e_r + r^(beta-1) g' e_theta."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    r = np.hypot(x1, x2)
    theta = np.arctan2(x2, x1)
    s, beta = profile.s, profile.beta
    scale = eps ** (s / (1 + s))
    with np.errstate(divide="ignore", invalid="ignore"):
        rb = np.where(r > 0, r ** (beta - 1), 0.0)
    g = profile(theta)
    dg = profile.derivative(theta)
    c, sn = np.cos(theta), np.sin(theta)
    d1 = scale * rb * (beta * g * c - dg * sn)
    d2 = scale * rb * (beta * g * sn + dg * c)
    return d1, d2


def barrier_values(profile: AngularProfile, eps: float, grid: QuarterGrid) -> np.ndarray:
    """Barrier at every node of the grid, edges x = 1/2 included."""
    x1, x2 = grid.mesh()
    return eval_barrier(profile, eps, x1, x2)


def barrier_field(profile: AngularProfile, eps: float, grid: QuarterGrid) -> SymmetricField:
    """Barrier sampled at interior nodes; the lines x = 1/2, y = 1/2 are pinned to zero.

    The barrier is a local object near the origin and every diagnostic
    that uses it stays well inside r < 1/4.
    """
    return SymmetricField.from_interior(grid, barrier_values(profile, eps, grid)[1:-1, 1:-1])


def profile_bounds(profile: AngularProfile):
    """(min, max) of g(theta)/sin(2 theta) over (0, pi/2), endpoint limit a/2 included."""
    th = profile.theta[1: profile.K // 2 + 1]
    ratio = profile.g[1: profile.K // 2 + 1] / np.sin(2 * th)
    ratio = np.append(ratio, profile.a / 2)
    return float(ratio.min()), float(ratio.max())
