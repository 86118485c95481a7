"""Double sine series, the Laplacian on odd-odd fields, psi_0 and the torus Green's function."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._transforms import dst_analysis, dst_synthesis
from .errors import DomainError, ShapeError, SingularityError
from .grid import QuarterGrid, SymmetricField

LAPLACIAN_KINDS = ("spectral", "fd4")


@dataclass(frozen=True, eq=False)
class SineSpectrum:
    """Coefficients a[m-1, k-1] of sum a_mk sin(2 pi m x1) sin(2 pi k x2).

    Modes run over 1..n-1 for an n-cell quarter grid: the n-th mode vanishes
    at every node, so the interior nodes and the stored modes are in
    bijection.
    """
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64, copy=True)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeError(f"spectrum must be square, got {c.shape}")
        QuarterGrid(c.shape[0] + 1)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0] + 1

    @property
    def grid(self) -> QuarterGrid:
        return QuarterGrid(self.n)

    @classmethod
    def single_mode(cls, n, m, k, amplitude=1.0):
        c = np.zeros((n - 1, n - 1))
        c[m - 1, k - 1] = amplitude
        return cls(c)


def transform_forward(f: SymmetricField) -> SineSpectrum:
    return SineSpectrum(dst_analysis(f.interior))


def transform_inverse(spec: SineSpectrum) -> SymmetricField:
    return SymmetricField.from_interior(spec.grid, dst_synthesis(spec.coeffs))


def laplacian_symbol(n: int, kind: str = "spectral") -> np.ndarray:
    """Positive 1D symbol lambda_m, m = 1..n-1; the 2D Laplacian is -(lambda_m + lambda_k).

    ``spectral`` is the exact 4 pi^2 m^2.  ``fd4`` is the symbol of the
    fourth-order five-point difference (-f[-2] + 16 f[-1] - 30 f + 16 f[1] - f[2]) / (12 h^2),
    which the odd reflections make exactly diagonal in the sine basis.
    """
    m = np.arange(1, n, dtype=float)
    if kind == "spectral":
        return 4.0 * np.pi ** 2 * m ** 2
    if kind == "fd4":
        h = 1.0 / (2 * n)
        t = np.pi * m / n
        return (2.5 - (8.0 / 3.0) * np.cos(t) + np.cos(2.0 * t) / 6.0) / h ** 2
    raise DomainError(f"unknown Laplacian kind {kind!r}")


def laplacian_eigenvalues(n: int, kind: str = "spectral") -> np.ndarray:
    lam = laplacian_symbol(n, kind)
    return -(lam[:, None] + lam[None, :])


def apply_laplacian(spec: SineSpectrum, kind: str = "spectral") -> SineSpectrum:
    return SineSpectrum(spec.coeffs * laplacian_eigenvalues(spec.n, kind))


def invert_laplacian(spec: SineSpectrum, kind: str = "spectral") -> SineSpectrum:
    return SineSpectrum(spec.coeffs / laplacian_eigenvalues(spec.n, kind))


def poisson_solve(f: SymmetricField, kind: str = "spectral") -> SymmetricField:
    """Delta^{-1} f for odd-odd data (sine modes carry no mean)."""
    return transform_inverse(invert_laplacian(transform_forward(f), kind))


def psi0_coefficient(m, k):
    """Sine coefficient of psi_0 for mode (m, k); zero unless both are odd.

    The data -sgn(x1) sgn(x2) has coefficient -16/(pi^2 m k) and the
    inverse Laplacian divides by -4 pi^2 (m^2 + k^2).
    """
    m = np.asarray(m, dtype=float)
    k = np.asarray(k, dtype=float)
    odd = (np.mod(m, 2) == 1) & (np.mod(k, 2) == 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = 16.0 / (np.pi ** 2 * m * k) / (4.0 * np.pi ** 2 * (m * m + k * k))
    return np.where(odd, c, 0.0)


def _alias_fold(n: int, modes: int):
    """List of (grid mode index array, true mode array, sign) for modes 1..modes."""
    blocks = []
    base = np.arange(1, n)
    for q in range(0, modes // n + 1):
        for sign, true in ((1.0, 2 * n * q + base), (-1.0, 2 * n * q - base)):
            if q == 0 and sign < 0:
                continue
            keep = (true >= 1) & (true <= modes)
            if np.any(keep):
                blocks.append((base[keep] - 1, true[keep], sign))
    return blocks


def psi0_spectrum(n: int, modes: int | None = None) -> SineSpectrum:
    """Grid spectrum of psi_0 truncated at ``modes`` per direction.

    Modes beyond n-1 are folded onto the grid modes (sin(pi m' i / n) is
    +-sin(pi m i / n) for m' = 2qn +- m), so node values equal the
    truncated series exactly.
    """
    modes = n - 1 if modes is None else int(modes)
    if modes < 1:
        raise DomainError("need at least one mode")
    coeffs = np.zeros((n - 1, n - 1))
    blocks = _alias_fold(n, modes)
    for gi, ti, si in blocks:
        for gj, tj, sj in blocks:
            coeffs[np.ix_(gi, gj)] += si * sj * psi0_coefficient(ti[:, None], tj[None, :])
    return SineSpectrum(coeffs)


def compute_psi0(modes: int, n: int | None = None) -> SymmetricField:
    """psi_0 = Delta^{-1}[-sgn(x1) sgn(x2)] synthesized from exact coefficients.

    ``modes`` must be a power of two; ``n`` defaults to ``modes``.  With
    modes = n every mode that is visible on the grid is used.
    """
    modes = int(modes)
    if modes < 1 or modes & (modes - 1):
        raise DomainError(f"modes must be a power of two, got {modes}")
    n = modes if n is None else int(n)
    grid = QuarterGrid(n)
    spec = psi0_spectrum(n, min(modes, n - 1) if modes <= n else modes)
    interior = dst_synthesis(spec.coeffs)
    interior = 0.5 * (interior + interior.T)
    return SymmetricField.from_interior(grid, interior)


# ---------------------------------------------------------------- Green's function

def _bernoulli2(x):
    return x * x - x + 1.0 / 6.0


def _log_abs_one_minus(decay, d2):
    """ln|1 - exp(-2 pi decay + 2 pi i d2)| without cancellation near 0."""
    rho = np.exp(-2.0 * np.pi * decay)
    one_minus = -np.expm1(-2.0 * np.pi * decay)
    return 0.5 * np.log(one_minus ** 2 + 4.0 * rho * np.sin(np.pi * d2) ** 2)


def _green_rows(d1, d2, terms):
    """Mean-zero torus Green's function, x1-direction summed in closed form.

    d1, d2 are reduced to [0, 1).  The k2 = 0 row gives -B2(d1)/2, the two
    leading exponentials of every other row sum to logarithms, and what is
    left decays like exp(-2 pi k).
    """
    out = -0.5 * _bernoulli2(d1)
    out += (_log_abs_one_minus(d1, d2) + _log_abs_one_minus(1.0 - d1, d2)) / (2.0 * np.pi)
    for k in range(1, terms + 1):
        damp = np.exp(-2.0 * np.pi * k) / -np.expm1(-2.0 * np.pi * k)
        if damp < 1e-300:
            break
        row = np.exp(-2.0 * np.pi * k * d1) + np.exp(-2.0 * np.pi * k * (1.0 - d1))
        out -= np.cos(2.0 * np.pi * k * d2) / k * row * damp / (2.0 * np.pi)
    return out


def green_function(dx1, dx2, terms: int = 16):
    """Torus Green's function G(dx) with Delta G = delta - 1, averaged over both summation orders."""
    d1 = np.mod(np.asarray(dx1, dtype=float), 1.0)
    d2 = np.mod(np.asarray(dx2, dtype=float), 1.0)
    return 0.5 * (_green_rows(d1, d2, terms) + _green_rows(d2, d1, terms))


def torus_distance(x, y):
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    d = np.mod(d, 1.0)
    d = np.minimum(d, 1.0 - d)
    return float(np.hypot(d[0], d[1]))


@dataclass(frozen=True)
class GreenSplit:
    x: tuple
    y: tuple
    distance: float
    total: float
    log_part: float
    regular_part: float


def torus_green(x, y, terms: int = 16) -> GreenSplit:
    """Green's function at a point pair with the logarithm split off.

    ``terms`` counts the exponentially damped remainder terms; the k-th
    term is below exp(-2 pi k), so 16 is far past double precision.
    """
    x = tuple(float(v) for v in x)
    y = tuple(float(v) for v in y)
    d = torus_distance(x, y)
    if d == 0.0:
        raise SingularityError("Green's function is singular at coincident points", x=x, y=y)
    g = 0.5 * (
        green_function(x[0] - y[0], x[1] - y[1], terms)
        + green_function(y[0] - x[0], y[1] - x[1], terms)
    )
    log_part = float(np.log(d) / (2.0 * np.pi))
    regular = float(g) - log_part
    return GreenSplit(x, y, d, log_part + regular, log_part, regular)
